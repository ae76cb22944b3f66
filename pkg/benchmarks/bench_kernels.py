"""Throughput of the compiled kernels against the numpy fallback.

    python3 benchmarks/bench_kernels.py [--repeat N] [--quick]

Reports milliseconds per call for the per-pixel HSMD chain (dense and sparse
at several foreground densities) and for one ReSuMe training pass of the
direction cells over a 20-frame sequence.
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from biomotion import hsmd, kernels, mhsnn
from biomotion.bench import direction_sequence
from biomotion.lif import LifParams


def best_of(fn, repeat: int) -> float:
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times) * 1e3


def chain_case(impl, currents, idx, cfg: hsmd.HsmdConfig):
    n = currents.size
    p = LifParams()

    def run():
        v = np.full((3, n), p.e_l)
        r = np.zeros((3, n))
        c = np.zeros((3, n), dtype=np.int64)
        b = np.zeros(n, dtype=np.uint8)
        impl(currents, v, r, c, b, idx, p, cfg.dt, cfg.w_l2_l3, cfg.w_l2_l4, cfg.w_l3_l4, cfg.steps_per_frame)

    return run


def bench_chain(repeat: int, sizes, densities):
    cfg = hsmd.HsmdConfig()
    rng = np.random.default_rng(0)
    impls = {k: m.hsmd_chain for k, m in kernels.IMPLEMENTATIONS.items()}
    print(f"{'size':>9} {'density':>8} " + " ".join(f"{f'{k} dense':>15} {f'{k} sparse':>15}" for k in impls))
    for w, h in sizes:
        for dens in densities:
            frame = np.where(rng.random(w * h) < dens, rng.random(w * h), 0.0) * cfg.c_p2c
            idx = np.flatnonzero(frame > 0).astype(np.intp)
            cells = []
            for impl in impls.values():
                cells.append(best_of(chain_case(impl, frame, None, cfg), repeat))
                cells.append(best_of(chain_case(impl, frame, idx, cfg), repeat))
            print(f"{w}x{h:<5} {dens:>8.2f} " + " ".join(f"{t:>15.2f}" for t in cells))


def bench_training(repeat: int):
    net = mhsnn.MhsnnNetwork(40, 40)
    seq = direction_sequence("right", seed=1)
    raster = net.features(seq.frames)[3]
    teacher = mhsnn.teacher_train("right", len(seq.frames), net.directions)
    p = mhsnn.ResumeParams()
    learn = np.ones(net.m_f, dtype=np.uint8)
    idx, ptr = mhsnn._csr(raster)
    print(f"\n{'ReSuMe pass (20 frames, 40x40)':<32}", end="")
    for name, mod in kernels.IMPLEMENTATIONS.items():
        impl = mod.l4_run

        def run(impl=impl):
            w = np.ones_like(net.weights_l4)
            out = np.zeros((len(raster), net.m_f), dtype=np.uint8)
            impl(idx, ptr, net.n_l3, teacher, w, net.cell_pops, net.n_pos, net.detector_lif, 1.0,
                 p.a_d, p.a_l, p.tau_d, p.tau_l, p.a_bias, p.lr, learn, out)

        print(f" {name} {best_of(run, repeat):8.2f} ms", end="")
    print()


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--quick", action="store_true", help="small frames only")
    args = ap.parse_args()
    print(f"active backend: {kernels.BACKEND}; implementations: {', '.join(kernels.IMPLEMENTATIONS)}")
    if "compiled" not in kernels.IMPLEMENTATIONS:
        print("compiled extension not built; only the numpy fallback is measured")
    sizes = [(160, 120)] if args.quick else [(160, 120), (320, 240), (720, 480)]
    bench_chain(args.repeat, sizes, (0.01, 0.1, 0.5, 1.0))
    bench_training(args.repeat)


if __name__ == "__main__":
    main()
