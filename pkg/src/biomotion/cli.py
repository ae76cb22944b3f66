"""Command-line entry point: ``biomotion <subcommand> [options]``.

Exit status is 0 on success, 1 for usage or validation errors and 2 for I/O
errors.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import bench, hsmd, imaging, mhsnn
from .config import ConfigError, ToolConfig, parse_config

EXIT_OK, EXIT_INVALID, EXIT_IO = 0, 1, 2


class UsageError(ValueError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


# -- sequence discovery ------------------------------------------------------


def _has_images(d: Path) -> bool:
    return any(p.suffix.lower() in imaging.IMAGE_SUFFIXES for p in d.iterdir() if p.is_file())


def _frame_dir(d: Path) -> Path:
    return d / "input" if (d / "input").is_dir() else d


def find_sequences(root: Path) -> list[Path]:
    """Sequence directories under ``root``: CDnet-style or plain image folders."""
    if not root.is_dir():
        raise FileNotFoundError(f"input directory not found: {root}")
    if (root / "input").is_dir() or _has_images(root):
        return [root]
    found = sorted(p for p in root.rglob("*") if p.is_dir() and (p / "input").is_dir())
    if not found:
        found = sorted(p for p in root.iterdir() if p.is_dir() and _has_images(p))
    return found


def _frame_files(seq: Path) -> list[Path]:
    d = _frame_dir(seq)
    return sorted(p for p in d.iterdir() if p.suffix.lower() in imaging.IMAGE_SUFFIXES)


def _rel(seq: Path, root: Path) -> Path:
    rel = seq.relative_to(root)
    return rel if rel.parts else Path(".")


def _run_jobs(fn, items, jobs: int):
    if jobs <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, items))


# -- labelled sequences ------------------------------------------------------

LABEL_FILE = "label.txt"


def write_labelled(seq: bench.LabelledSequence, path: Path) -> None:
    raw = [np.repeat(imaging.gray_to_uint8(f)[:, :, None], 3, axis=2) for f in seq.frames]
    gts = [np.where(m, bench.GtLabel.MOVING, bench.GtLabel.STATIC).astype(np.uint8) for m in seq.masks]
    bench.export_cdnet(raw, gts, path)
    (path / LABEL_FILE).write_text(seq.label + "\n")


def read_labelled(path: Path) -> bench.LabelledSequence:
    label_file = path / LABEL_FILE
    if not label_file.exists():
        raise mhsnn.MhsnnError(f"unlabelled sequence {path}")
    data = bench.load_cdnet(path)
    frames = [imaging.to_grayscale(f) for f in data.frames]
    masks = [g == bench.GtLabel.MOVING for g in data.gts]
    return bench.LabelledSequence(frames, label_file.read_text().strip(), masks)


def _labelled_under(root: Path, split: str) -> list[bench.LabelledSequence]:
    base = root / split if (root / split).is_dir() else root
    dirs = sorted(p.parent for p in base.rglob(LABEL_FILE))
    if not dirs:
        raise mhsnn.MhsnnError(f"no labelled sequences under {base}")
    return [read_labelled(d) for d in dirs]


def _axis_of(label: str) -> str:
    return "horizontal" if label in ("left", "right", "leftwards", "rightwards") else "vertical"


def _write_pcc(path: Path, tallies: dict[str, list[int]]) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["direction", "tp", "fp", "pcc", "pwc"])
        for d in imaging.DIRECTIONS:
            if d not in tallies:
                continue
            tp, fp = tallies[d]
            pcc, pwc = mhsnn.pcc_pwc(tp, fp) if tp + fp else (0.0, 0.0)
            writer.writerow([d, tp, fp, f"{pcc:.4f}", f"{pwc:.4f}"])


# -- subcommands -------------------------------------------------------------


def cmd_hsmd_run(cfg: ToolConfig, args) -> int:
    root = Path(cfg.input)
    out = Path(cfg.output)
    seqs = find_sequences(root)
    if not seqs:
        raise hsmd.HsmdError("no frames")

    def one(seq: Path):
        files = _frame_files(seq)
        return hsmd.run_to_directory(files, out / _rel(seq, root), cfg.hsmd, cfg.make_backend())

    for seq, summary in zip(seqs, _run_jobs(one, seqs, cfg.jobs)):
        print(f"{seq}: {summary['frames']} frames, {summary['mean_fps']:.1f} fps")
    return EXIT_OK


def cmd_synth(cfg: ToolConfig, args) -> int:
    out = Path(cfg.output)
    if args.suite:
        train, test = bench.direction_suite(args.per_direction, seed=args.seed, size=args.size, n_frames=args.frames)
        for split, seqs in (("train", train), ("test", test)):
            for k, seq in enumerate(seqs):
                write_labelled(seq, out / split / f"{k:04d}_{seq.label}")
        print(f"wrote {len(train)} train and {len(test)} test sequences to {out}")
        return EXIT_OK
    spec = bench.SyntheticSceneSpec(
        width=args.width, height=args.height, n_frames=args.frames, seed=args.seed,
        velocity=(args.vi, args.vj), noise_sigma=args.noise,
    )
    frames, gts = bench.synth_generate(spec)
    bench.export_cdnet(frames, gts, out)
    print(f"wrote {len(frames)} frames to {out}")
    return EXIT_OK


def cmd_mhsnn_train(cfg: ToolConfig, args) -> int:
    seqs = _labelled_under(Path(cfg.input), "train")
    h, w = seqs[0].frames[0].shape
    net = mhsnn.MhsnnNetwork(h, w)
    mhsnn.train(net, seqs, cfg.resume, cfg.iterations, cfg.schedule)
    target = Path(cfg.weights or cfg.output)
    target.parent.mkdir(parents=True, exist_ok=True)
    mhsnn.save_weights(target, net.weights_l4)
    if args.csv:
        mhsnn.export_weights_csv(args.csv, net)
    print(f"trained on {len(seqs)} sequences for {cfg.iterations} iterations -> {target}")
    return EXIT_OK


def cmd_mhsnn_eval(cfg: ToolConfig, args) -> int:
    if not cfg.weights:
        raise ConfigError("mhsnn-eval needs --weights")
    seqs = _labelled_under(Path(cfg.input), "test")
    h, w = seqs[0].frames[0].shape
    net = mhsnn.MhsnnNetwork(h, w)
    flat = mhsnn.load_weights(cfg.weights)
    if flat.size != net.weights_l4.size:
        raise mhsnn.MhsnnError(f"weights file holds {flat.size} values, network needs {net.weights_l4.size}")
    net.weights_l4 = flat.reshape(net.weights_l4.shape).copy()
    tallies: dict[str, list[int]] = {}
    for seq in seqs:
        d = mhsnn.LABEL_DIRECTION.get(seq.label, seq.label)
        labels = mhsnn.classify(net, seq.frames, cfg.window, _axis_of(seq.label))
        # windows that start inside the warm-up are not scored
        starts = range(0, len(seq.frames), cfg.window)
        t = tallies.setdefault(d, [0, 0])
        for s, lab in zip(starts, labels):
            if s < cfg.warmup_frames:
                continue
            t[0 if lab == mhsnn.DIRECTION_LABEL[d] else 1] += 1
    _write_pcc(Path(cfg.output), tallies)
    return EXIT_OK


def cmd_codd_run(cfg: ToolConfig, args) -> int:
    seqs = _labelled_under(Path(cfg.input), "test")
    tallies: dict[str, list[int]] = {}
    for seq in seqs:
        if args.oracle:
            masks = seq.masks
        else:
            backend = cfg.make_backend()
            masks = [hsmd.subtract(backend, f) > 0 for f in seq.frames]
        d = mhsnn.LABEL_DIRECTION.get(seq.label, seq.label)
        t = tallies.setdefault(d, [0, 0])
        for k, (h, v) in enumerate(mhsnn.codd_sequence(masks)):
            if k == 0:
                continue
            lab = h if _axis_of(d) == "horizontal" else v
            t[0 if lab == mhsnn.DIRECTION_LABEL[d] else 1] += 1
    _write_pcc(Path(cfg.output), tallies)
    return EXIT_OK


def _mask_path(mask_root: Path, rel: Path, k: int) -> Path:
    return mask_root / rel / f"bin{k:06d}.png"


def cmd_bench(cfg: ToolConfig, args) -> int:
    root = Path(cfg.input)
    out = Path(cfg.output)
    seqs = [s for s in find_sequences(root) if (s / "groundtruth").is_dir()]
    if not seqs:
        raise bench.BenchError(f"no CDnet sequences under {root}")
    methods = {"oracle": None} if args.oracle else {}
    for m in args.masks or []:
        name, _, path = m.rpartition("=")
        methods[name or Path(path).name] = Path(path)
    if not methods:
        raise UsageError("bench needs --masks or --oracle")

    def score(item):
        method, mask_root, seq = item
        data = bench.load_cdnet(seq)
        rel = _rel(seq, root)
        counts = bench.ConfusionCounts()
        for k, _, gt in data.evaluated():
            if mask_root is None:
                mask = gt == bench.GtLabel.MOVING
            else:
                p = _mask_path(mask_root, rel, k)
                if not p.exists():
                    raise FileNotFoundError(f"missing mask for frame {k}: {p}")
                mask = imaging.read_gray8(p) > 127
            counts = counts + bench.score_frame(mask, gt, data.roi)
        category = rel.parent.as_posix() if rel.parent != Path(".") else "default"
        return method, category, rel.as_posix(), bench.compute_metrics(counts, method, category)

    items = [(m, p, s) for m, p in methods.items() for s in seqs]
    results = _run_jobs(score, items, cfg.jobs)
    by_cat: dict[tuple[str, str], list] = {}
    for method, category, _, rep in results:
        by_cat.setdefault((method, category), []).append(rep)
    reports = []
    for (method, category), reps in sorted(by_cat.items()):
        mean = {k: float(np.mean([getattr(r, k) for r in reps])) for k in bench.METRICS}
        reports.append(bench.MetricsReport(**mean, method=method, category=category))
    table = bench.rank_methods(reports)
    fps = {}
    for method, mask_root in methods.items():
        for seq in seqs:
            rel = _rel(seq, root)
            tj = mask_root / rel / "timing.json" if mask_root else None
            if tj and tj.exists():
                fps[f"{method}/{rel.as_posix()}"] = json.loads(tj.read_text())["mean_fps"]
    out.mkdir(parents=True, exist_ok=True)
    bench.emit_report(table, reports, fps, out / "metrics.csv", out / "summary.json")
    for rep in reports:
        print(f"{rep.method} {rep.category}: F1={rep.f1:.4f} Re={rep.re:.4f} Sp={rep.sp:.4f}")
    return EXIT_OK


COMMANDS = {
    "hsmd-run": cmd_hsmd_run,
    "mhsnn-train": cmd_mhsnn_train,
    "mhsnn-eval": cmd_mhsnn_eval,
    "codd-run": cmd_codd_run,
    "bench": cmd_bench,
    "synth": cmd_synth,
}


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="biomotion", description="Spiking-network motion detection tools.")
    sub = parser.add_subparsers(dest="command", metavar="SUBCOMMAND", parser_class=_Parser)
    sub.required = True

    def common(p, need_input=True):
        p.add_argument("--config", help="key=value config file")
        if need_input:
            p.add_argument("--input", help="input directory")
        p.add_argument("--output", help="output path")
        p.add_argument("--jobs", type=int, help="sequences processed in parallel")

    p = sub.add_parser("hsmd-run", help="write motion masks and timing for image sequences")
    common(p)
    p.add_argument("--backend", choices=["diff", "gauss"])
    p.add_argument("--mode", choices=["dense", "sparse"])

    p = sub.add_parser("mhsnn-train", help="train the direction cells on labelled sequences")
    common(p)
    p.add_argument("--iterations", type=int)
    p.add_argument("--weights", help="weights file to write (defaults to --output)")
    p.add_argument("--csv", help="also export the weights as CSV")

    p = sub.add_parser("mhsnn-eval", help="score trained direction cells, writing PCC/PWC CSV")
    common(p)
    p.add_argument("--weights", help="trained weights file")
    p.add_argument("--window", type=int, help="frames per classification window")

    p = sub.add_parser("codd-run", help="centre-of-mass direction baseline, writing PCC/PWC CSV")
    common(p)
    p.add_argument("--backend", choices=["diff", "gauss"])
    p.add_argument("--oracle", action="store_true", help="use ground-truth masks")

    p = sub.add_parser("bench", help="score masks against CDnet ground truth")
    common(p)
    p.add_argument("--masks", action="append", help="[NAME=]DIR of bin%%06d.png masks; repeatable")
    p.add_argument("--oracle", action="store_true", help="also score a perfect mask")

    p = sub.add_parser("synth", help="generate a synthetic fixture in CDnet layout")
    common(p, need_input=False)
    p.add_argument("--suite", action="store_true", help="labelled direction suite instead of one scene")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--frames", type=int, default=None)
    p.add_argument("--width", type=int, default=320)
    p.add_argument("--height", type=int, default=240)
    p.add_argument("--vi", type=float, default=0.0)
    p.add_argument("--vj", type=float, default=2.0)
    p.add_argument("--noise", type=float, default=0.01)
    p.add_argument("--size", type=int, default=40, help="suite frame side")
    p.add_argument("--per-direction", type=int, default=100)
    return parser


_OVERRIDES = ("input", "output", "backend", "mode", "jobs", "iterations", "weights", "window")


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        overrides = {k: getattr(args, k, None) for k in _OVERRIDES}
        cfg = parse_config(args.config, overrides)
        if args.command == "synth" and args.frames is None:
            args.frames = 20 if args.suite else 200
        if args.command not in ("synth",) and not cfg.input:
            raise UsageError("--input is required")
        if not (cfg.output or (args.command == "mhsnn-train" and cfg.weights)):
            raise UsageError("--output is required")
        return COMMANDS[args.command](cfg, args)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_INVALID
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
