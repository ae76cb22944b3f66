"""Hybrid motion detector: background subtraction feeding a three-layer SNN.

Per frame::

    gray -> background subtraction -> currents -> L2 -> L3 (one-step buffer) -> L4
         -> spike sums -> box filter -> normalise -> threshold

Every pixel owns an independent L2 -> L3 -> L4 chain. L2 is driven by the
pixel's current, L3 by the previous inner step's L2 spike, and L4 by the
current L2 spike plus the current L3 spike. Chains start each frame at rest,
so a pixel with no current never spikes and the sparse mode, which skips
those pixels, gives exactly the dense result.
"""

from __future__ import annotations

import json
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Iterable, Iterator

import numpy as np

from . import imaging, kernels
from .lif import LifLayer, LifParams, max_spikes


class HsmdError(ValueError):
    pass


class FrameReadError(OSError):
    def __init__(self, index: int, source, cause: Exception | None = None):
        super().__init__(f"cannot read frame {index} ({source}): {cause}")
        self.index = index


# -- background subtraction --------------------------------------------------


@dataclass
class BsBackendState:
    kind: str = "frame_diff"
    alpha: float = 0.01
    diff_threshold: float = 0.1
    k_sigma: float = 2.5
    init_variance: float = 0.0025
    min_variance: float = 1e-4
    previous: np.ndarray | None = field(default=None, repr=False)
    mean: np.ndarray | None = field(default=None, repr=False)
    variance: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        if self.kind not in BACKENDS:
            raise HsmdError(f"unknown backend {self.kind!r}; choose from {sorted(BACKENDS)}")
        if not 0.0 < self.alpha <= 1.0:
            raise HsmdError(f"alpha must be in (0, 1], got {self.alpha}")
        if not 0.0 <= self.diff_threshold <= 1.0:
            raise HsmdError(f"diff_threshold must be in [0, 1], got {self.diff_threshold}")
        if self.k_sigma < 0 or self.init_variance < 0 or self.min_variance < 0:
            raise HsmdError("k_sigma and the variances must be non-negative")

    def _check(self, frame: np.ndarray, ref: np.ndarray | None) -> None:
        if ref is not None and ref.shape != frame.shape:
            raise HsmdError(f"frame shape {frame.shape} does not match background {ref.shape}")


def bs_frame_diff(state: BsBackendState, frame: np.ndarray) -> np.ndarray:
    """Absolute difference to the previous frame, zeroed below ``diff_threshold``."""
    frame = imaging.check_gray(frame)
    state._check(frame, state.previous)
    if state.previous is None:
        out = np.zeros_like(frame)
    else:
        out = np.abs(frame - state.previous)
        out[out < state.diff_threshold] = 0.0
    state.previous = frame.copy()
    return out


def bs_running_gaussian(state: BsBackendState, frame: np.ndarray) -> np.ndarray:
    """Per-pixel exponentially weighted Gaussian background.

    A pixel is foreground (keeping its intensity) when it lies more than
    ``k_sigma`` standard deviations from the running mean. The mean is then
    updated with weight ``alpha`` everywhere, the variance only where the
    pixel was background; foreground pixels' variance just decays toward
    ``min_variance``. With ``alpha = 1`` this is frame differencing with a
    zero threshold.
    """
    frame = imaging.check_gray(frame)
    state._check(frame, state.mean)
    if state.mean is None:
        state.mean = frame.copy()
        state.variance = np.full_like(frame, state.init_variance)
        return np.zeros_like(frame)
    d = frame - state.mean
    bound = state.k_sigma * np.sqrt(state.variance)
    outlier = np.abs(d) > bound
    fg = np.where(outlier, frame, 0.0)
    a = state.alpha
    state.mean = state.mean + a * d
    # only background pixels feed the spread; a passing object would otherwise
    # inflate it enough to hide itself on its next visit
    var = (1.0 - a) * (state.variance + np.where(outlier, 0.0, a * d * d))
    if a < 1.0:
        var[outlier] = np.maximum(var[outlier], state.min_variance)
    state.variance = var
    return fg


BACKENDS = {"frame_diff": bs_frame_diff, "running_gaussian": bs_running_gaussian}
BACKEND_ALIASES = {"diff": "frame_diff", "gauss": "running_gaussian"}


def make_backend(kind: str = "frame_diff", **params) -> BsBackendState:
    return BsBackendState(kind=BACKEND_ALIASES.get(kind, kind), **params)


def subtract(state: BsBackendState, frame: np.ndarray) -> np.ndarray:
    return BACKENDS[state.kind](state, frame)


# -- spiking network ---------------------------------------------------------


@dataclass
class HsmdConfig:
    c_p2c: float = 17.5
    w_l2_l3: float = 1370.0
    w_l2_l4: float = 1370.0
    w_l3_l4: float = 1370.0
    steps_per_frame: int = 10
    dt: float = 1.0
    mask_threshold: float = 0.1
    filter_u: int = 3
    filter_v: int = 3
    lif: LifParams = field(default_factory=LifParams)
    mode: str = "dense"

    def __post_init__(self):
        if self.steps_per_frame < 1:
            raise HsmdError(f"steps_per_frame must be >= 1, got {self.steps_per_frame}")
        for name in ("c_p2c", "w_l2_l3", "w_l2_l4", "w_l3_l4"):
            if getattr(self, name) < 0:
                raise HsmdError(f"{name} must be >= 0")
        if not 0 < self.dt <= self.lif.tau_m:
            raise HsmdError(f"dt must satisfy 0 < dt <= tau_m, got {self.dt}")
        if not 0.0 <= self.mask_threshold <= 1.0:
            raise HsmdError(f"mask_threshold must be in [0, 1], got {self.mask_threshold}")
        for name in ("filter_u", "filter_v"):
            val = getattr(self, name)
            if val < 1 or val % 2 == 0:
                raise HsmdError(f"{name} must be odd and >= 1, got {val}")
        if self.mode not in ("dense", "sparse"):
            raise HsmdError(f"mode must be 'dense' or 'sparse', got {self.mode!r}")

    @property
    def max_count(self) -> int:
        return max_spikes(self.steps_per_frame, self.lif, self.dt)


class SnnState:
    """Three same-sized LIF layers plus the L2 spike buffer.

    Layer arrays are stacked as ``(3, n)`` so the kernels can walk one pixel's
    chain in a single pass; ``l2``, ``l3`` and ``l4`` are views onto them.
    """

    def __init__(self, n: int, params: LifParams):
        if n < 1:
            raise HsmdError("network needs at least one pixel")
        self.n = n
        self.params = params
        self.v = np.full((3, n), params.e_l)
        self.refr = np.zeros((3, n))
        self.counts = np.zeros((3, n), dtype=np.int64)
        self.l2_spike_buffer = np.zeros(n, dtype=np.uint8)
        # pixels possibly away from rest; None means "any"
        self._touched: np.ndarray | None = None

    def _layer(self, i: int) -> LifLayer:
        return LifLayer(self.n, self.params, self.v[i], self.refr[i], self.counts[i])

    l2 = property(lambda self: self._layer(0))
    l3 = property(lambda self: self._layer(1))
    l4 = property(lambda self: self._layer(2))

    def rest(self) -> None:
        idx = self._touched
        if idx is None:
            self.v.fill(self.params.e_l)
            self.refr.fill(0.0)
            self.counts.fill(0)
            self.l2_spike_buffer.fill(0)
        elif idx.size:
            self.v[:, idx] = self.params.e_l
            self.refr[:, idx] = 0.0
            self.counts[:, idx] = 0
            self.l2_spike_buffer[idx] = 0


def encode_currents(foreground: np.ndarray, cfg: HsmdConfig) -> np.ndarray:
    return np.asarray(foreground, dtype=np.float64) * cfg.c_p2c


def _run_chain(state: SnnState, currents: np.ndarray, idx, cfg: HsmdConfig, workers: int):
    impl = kernels.hsmd_chain
    args = (state.params, cfg.dt, cfg.w_l2_l3, cfg.w_l2_l4, cfg.w_l3_l4, cfg.steps_per_frame)

    def run(part):
        impl(currents, state.v, state.refr, state.counts, state.l2_spike_buffer, part, *args)

    if workers <= 1:
        run(idx)
        return
    all_idx = np.arange(state.n, dtype=np.intp) if idx is None else idx
    parts = [p for p in np.array_split(all_idx, workers) if p.size]
    if kernels.BACKEND == "compiled":
        with ThreadPoolExecutor(max_workers=workers) as pool:
            list(pool.map(run, parts))
    else:
        for part in parts:
            run(part)


def _process(state, currents, cfg, sparse: bool, workers: int, all_layers: bool):
    shape = np.shape(currents)
    flat = np.ascontiguousarray(currents, dtype=np.float64).ravel()
    if flat.size != state.n:
        raise HsmdError(f"expected {state.n} currents, got {flat.size}")
    state.rest()
    if sparse:
        idx = np.flatnonzero(flat > 0.0).astype(np.intp)
        if idx.size:
            _run_chain(state, flat, idx, cfg, workers)
        state._touched = idx
        sums = np.zeros((3, state.n), dtype=np.int64)
        sums[:, idx] = state.counts[:, idx]
        state.counts[:, idx] = 0
    else:
        _run_chain(state, flat, None, cfg, workers)
        state._touched = None
        sums = state.counts.copy()
        state.counts.fill(0)
    if all_layers:
        return tuple(s.reshape(shape) for s in sums)
    return sums[2].reshape(shape)


def snn_process_frame(state: SnnState, currents, cfg: HsmdConfig, workers: int = 1, all_layers: bool = False):
    """Dense evaluation: every pixel's chain runs ``steps_per_frame`` steps.

    Returns the L4 spike tally per pixel (or the L2, L3, L4 tallies when
    ``all_layers`` is set); accumulators are cleared afterwards.
    """
    return _process(state, currents, cfg, False, workers, all_layers)


def snn_process_frame_sparse(state: SnnState, currents, cfg: HsmdConfig, workers: int = 1, all_layers: bool = False):
    """Like :func:`snn_process_frame` but only pixels with positive current are simulated."""
    return _process(state, currents, cfg, True, workers, all_layers)


@dataclass
class MotionMask:
    width: int
    height: int
    spike_sums: np.ndarray
    normalized: np.ndarray
    binary: np.ndarray


def postprocess(spike_sums, cfg: HsmdConfig) -> MotionMask:
    sums = np.asarray(spike_sums)
    filtered = imaging.box_filter(sums.astype(np.float64), cfg.filter_u, cfg.filter_v)
    normalized = np.clip(filtered / cfg.max_count, 0.0, 1.0)
    binary = (normalized >= cfg.mask_threshold).astype(np.uint8)
    h, w = sums.shape
    return MotionMask(width=w, height=h, spike_sums=sums, normalized=normalized, binary=binary)


# -- pipeline ----------------------------------------------------------------

STAGES = ("grayscale", "background", "encode", "snn", "postprocess")


class HsmdPipeline:
    """Sequential per-frame state machine: background model plus SNN."""

    def __init__(self, cfg: HsmdConfig | None = None, backend: BsBackendState | None = None, workers: int = 1):
        self.cfg = cfg or HsmdConfig()
        self.backend = backend or make_backend()
        self.workers = workers
        self.state: SnnState | None = None

    def process(self, frame: np.ndarray) -> tuple[MotionMask, dict]:
        timing = {}
        t0 = time.perf_counter()
        frame = np.asarray(frame)
        gray = imaging.to_grayscale(frame) if frame.ndim == 3 else imaging.check_gray(frame)
        t1 = time.perf_counter()
        fg = subtract(self.backend, gray)
        t2 = time.perf_counter()
        currents = encode_currents(fg, self.cfg)
        t3 = time.perf_counter()
        if self.state is None:
            self.state = SnnState(gray.size, self.cfg.lif)
        run = snn_process_frame_sparse if self.cfg.mode == "sparse" else snn_process_frame
        sums = run(self.state, currents, self.cfg, workers=self.workers)
        t4 = time.perf_counter()
        mask = postprocess(sums, self.cfg)
        t5 = time.perf_counter()
        for name, a, b in zip(STAGES, (t0, t1, t2, t3, t4), (t1, t2, t3, t4, t5)):
            timing[name] = (b - a) * 1e3
        return mask, timing


def _frames(source) -> Iterator[np.ndarray]:
    """Yield frames from arrays, file paths, or a directory of images."""
    if isinstance(source, (str, Path)):
        d = Path(source)
        if not d.is_dir():
            raise FrameReadError(0, d, FileNotFoundError("not a directory"))
        source = sorted(p for p in d.iterdir() if p.suffix.lower() in imaging.IMAGE_SUFFIXES)
    for i, item in enumerate(source):
        if isinstance(item, (str, Path)):
            try:
                yield imaging.read_raw(item)
            except Exception as exc:  # PIL raises several unrelated types
                raise FrameReadError(i, item, exc) from exc
        else:
            yield item


def pipeline_run(frames, cfg: HsmdConfig | None = None, backend: BsBackendState | None = None, workers: int = 1):
    """Process frames strictly in order, yielding ``(MotionMask, stage_ms)``."""
    pipe = HsmdPipeline(cfg, backend, workers)
    empty = True
    for frame in _frames(frames):
        empty = False
        yield pipe.process(frame)
    if empty:
        raise HsmdError("no frames")


def run_to_directory(frames, out_dir, cfg=None, backend=None, workers=1, first_index=1) -> dict:
    """Write ``bin%06d.png`` masks (0/255) and ``timing.json``; returns the timing summary."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    totals = dict.fromkeys(STAGES, 0.0)
    n = 0
    for i, (mask, timing) in enumerate(pipeline_run(frames, cfg, backend, workers)):
        imaging.write_gray8(out / f"bin{first_index + i:06d}.png", mask.binary * 255)
        for k, v in timing.items():
            totals[k] += v
        n += 1
    per_stage = {k: v / n for k, v in totals.items()}
    total_ms = sum(per_stage.values())
    summary = {
        "frames": n,
        "mean_fps": 1e3 / total_ms if total_ms > 0 else float("inf"),
        "per_stage_ms": per_stage,
    }
    (out / "timing.json").write_text(json.dumps(summary, indent=2))
    return summary


def config_dict(cfg: HsmdConfig) -> dict:
    return asdict(cfg)
