"""CDnet-layout sequences and synthetic moving-object scenes with exact ground truth.

On-disk layout (one sequence per directory)::

    input/in000001.jpg ...      frames, any common image format
    groundtruth/gt000001.png    five-level labels
    temporalROI.txt             "first last", 1-based and inclusive
    ROI.bmp / ROI.png           optional spatial mask, nonzero = evaluated
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .. import imaging
from .scoring import BenchError, GtLabel, check_gt

_INDEX = re.compile(r"(\d+)$")


@dataclass
class CdnetSequence:
    frames: list[np.ndarray]
    gts: list[np.ndarray]
    temporal_roi: tuple[int, int]
    roi: np.ndarray | None = None
    name: str = ""

    def __len__(self) -> int:
        return len(self.frames)

    def pairs(self):
        return list(zip(self.frames, self.gts))

    def evaluated(self):
        """Yield ``(index, frame, gt)`` for 1-based indices inside the temporal ROI."""
        first, last = self.temporal_roi
        for k in range(max(first, 1), min(last, len(self)) + 1):
            yield k, self.frames[k - 1], self.gts[k - 1]


def _indexed(directory: Path, prefix: str) -> dict[int, Path]:
    out = {}
    for p in directory.iterdir():
        if p.suffix.lower() not in imaging.IMAGE_SUFFIXES or not p.stem.startswith(prefix):
            continue
        m = _INDEX.search(p.stem)
        if m:
            out[int(m.group(1))] = p
    return out


def _read_temporal_roi(path: Path, n: int) -> tuple[int, int]:
    if not path.exists():
        return 1, n
    parts = path.read_text().split()
    try:
        first, last = (int(x) for x in parts)
    except ValueError:
        raise BenchError(f"unparseable {path.name}: expected two integers, got {parts!r}") from None
    if not 1 <= first <= last:
        raise BenchError(f"bad temporal ROI {first} {last}")
    return first, last


def load_cdnet(path) -> CdnetSequence:
    root = Path(path)
    in_dir, gt_dir = root / "input", root / "groundtruth"
    for d in (in_dir, gt_dir):
        if not d.is_dir():
            raise BenchError(f"missing directory {d}")
    inputs = _indexed(in_dir, "in")
    gts = _indexed(gt_dir, "gt")
    if not inputs:
        raise BenchError(f"no frames in {in_dir}")
    for k in sorted(inputs):
        if k not in gts:
            raise BenchError(f"missing ground truth for frame {k}")
    if len(gts) != len(inputs):
        raise BenchError(f"{len(inputs)} input frames but {len(gts)} ground-truth frames")
    order = sorted(inputs)
    if order != list(range(order[0], order[0] + len(order))):
        raise BenchError("frame indices are not contiguous")
    frames = [imaging.read_raw(inputs[k]) for k in order]
    labels = [check_gt(imaging.read_gray8(gts[k])) for k in order]
    roi = None
    for name in ("ROI.bmp", "ROI.png"):
        if (root / name).exists():
            roi = imaging.read_gray8(root / name) != 0
            break
    return CdnetSequence(frames, labels, _read_temporal_roi(root / "temporalROI.txt", len(frames)), roi, root.name)


def export_cdnet(frames, gts, path, temporal_roi=None, roi=None) -> Path:
    """Write a sequence in CDnet layout with lossless PNG inputs."""
    root = Path(path)
    (root / "input").mkdir(parents=True, exist_ok=True)
    (root / "groundtruth").mkdir(parents=True, exist_ok=True)
    for k, (frame, gt) in enumerate(zip(frames, gts), start=1):
        imaging.write_raw(root / "input" / f"in{k:06d}.png", frame)
        imaging.write_gray8(root / "groundtruth" / f"gt{k:06d}.png", check_gt(gt))
    first, last = temporal_roi or (1, len(frames))
    (root / "temporalROI.txt").write_text(f"{first} {last}\n")
    if roi is not None:
        imaging.write_gray8(root / "ROI.png", (np.asarray(roi) != 0).astype(np.uint8) * 255)
    return root


# -- synthetic scenes --------------------------------------------------------


@dataclass
class SyntheticSceneSpec:
    width: int = 320
    height: int = 240
    shape: str = "rect"  # rect | disc
    size: tuple[int, int] = (20, 20)  # rows, cols; a disc uses size[0] as diameter
    velocity: tuple[float, float] = (0.0, 2.0)  # (di, dj) pixels per frame
    start: tuple[float, float] | None = None  # top-left corner; centred when None
    n_frames: int = 200
    background: float | tuple[float, float] = 0.2  # constant, or (first, last) drift
    object_intensity: float = 1.0
    noise_sigma: float = 0.01
    seed: int = 0
    wrap: bool = True

    def __post_init__(self):
        if self.shape not in ("rect", "disc"):
            raise BenchError(f"shape must be 'rect' or 'disc', got {self.shape!r}")
        rows, cols = self.size
        if rows < 1 or cols < 1:
            raise BenchError("object size must be positive")
        if rows > self.height or cols > self.width:
            raise BenchError(f"object {self.size} larger than frame {self.height}x{self.width}")
        if self.n_frames < 1:
            raise BenchError("n_frames must be >= 1")
        if self.noise_sigma < 0:
            raise BenchError("noise_sigma must be >= 0")


def _footprint(spec: SyntheticSceneSpec) -> np.ndarray:
    rows, cols = spec.size
    if spec.shape == "rect":
        return np.ones((rows, cols), dtype=bool)
    d = rows
    c = (d - 1) / 2
    y, x = np.mgrid[0:d, 0:d]
    return (y - c) ** 2 + (x - c) ** 2 <= (d / 2) ** 2


def _reflect(pos: float, span: int) -> float:
    """Bounce a coordinate inside [0, span]."""
    if span <= 0:
        return 0.0
    period = 2 * span
    p = pos % period
    return p if p <= span else period - p


def object_positions(spec: SyntheticSceneSpec) -> list[tuple[int, int]]:
    fp = _footprint(spec)
    if spec.start is None:
        i0, j0 = (spec.height - fp.shape[0]) / 2, (spec.width - fp.shape[1]) / 2
    else:
        i0, j0 = spec.start
    di, dj = spec.velocity
    out = []
    for t in range(spec.n_frames):
        i, j = i0 + di * t, j0 + dj * t
        if not spec.wrap:
            i = _reflect(i, spec.height - fp.shape[0])
            j = _reflect(j, spec.width - fp.shape[1])
        out.append((int(np.floor(i)), int(np.floor(j))))
    return out


def object_mask(spec: SyntheticSceneSpec, top_left: tuple[int, int]) -> np.ndarray:
    fp = _footprint(spec)
    mask = np.zeros((spec.height, spec.width), dtype=bool)
    rr, cc = np.nonzero(fp)
    rr = rr + top_left[0]
    cc = cc + top_left[1]
    if spec.wrap:
        rr %= spec.height
        cc %= spec.width
    mask[rr, cc] = True
    return mask


def synth_generate(spec: SyntheticSceneSpec):
    """Return ``(raw_frames, gt_frames)`` for the scene; deterministic given the seed."""
    rng = np.random.default_rng(spec.seed)
    if isinstance(spec.background, (tuple, list)):
        levels = np.linspace(spec.background[0], spec.background[1], spec.n_frames)
    else:
        levels = np.full(spec.n_frames, float(spec.background))
    frames, gts = [], []
    for t, pos in enumerate(object_positions(spec)):
        mask = object_mask(spec, pos)
        gray = np.full((spec.height, spec.width), levels[t])
        gray[mask] = spec.object_intensity
        if spec.noise_sigma > 0:
            gray = gray + rng.normal(0.0, spec.noise_sigma, gray.shape)
        g8 = imaging.gray_to_uint8(gray)
        frames.append(np.repeat(g8[:, :, None], 3, axis=2))
        gts.append(np.where(mask, GtLabel.MOVING, GtLabel.STATIC).astype(np.uint8))
    return frames, gts


# -- direction suite ---------------------------------------------------------

DIRECTION_VELOCITY = {"left": (0, -1), "right": (0, 1), "up": (-1, 0), "down": (1, 0)}


@dataclass
class LabelledSequence:
    frames: list[np.ndarray]  # gray, [0, 1]
    label: str
    masks: list[np.ndarray] = field(repr=False)  # exact object support per frame
    seed: int = 0

    def flipped(self) -> "LabelledSequence":
        """Horizontal mirror; left and right swap."""
        swap = {"left": "right", "right": "left"}
        return LabelledSequence(
            [f[:, ::-1].copy() for f in self.frames],
            swap.get(self.label, self.label),
            [m[:, ::-1].copy() for m in self.masks],
            self.seed,
        )


def direction_sequence(label: str, seed: int, size: int = 40, n_frames: int = 20, noise_sigma: float = 0.01) -> LabelledSequence:
    """One bright rectangle or disc drifting one pixel per frame on a dark noisy background."""
    if label not in DIRECTION_VELOCITY:
        raise BenchError(f"unknown direction {label!r}")
    rng = np.random.default_rng(seed)
    shape = "rect" if rng.random() < 0.5 else "disc"
    if shape == "rect":
        obj = (int(rng.integers(6, 13)), int(rng.integers(6, 13)))
    else:
        d = int(rng.integers(7, 13))
        obj = (d, d)
    di, dj = DIRECTION_VELOCITY[label]
    travel = n_frames - 1
    lo_i = travel if di < 0 else 0
    hi_i = size - obj[0] - (travel if di > 0 else 0)
    lo_j = travel if dj < 0 else 0
    hi_j = size - obj[1] - (travel if dj > 0 else 0)
    if hi_i < lo_i or hi_j < lo_j:
        raise BenchError("object cannot stay in frame for the whole sequence")
    start = (int(rng.integers(lo_i, hi_i + 1)), int(rng.integers(lo_j, hi_j + 1)))
    spec = SyntheticSceneSpec(
        width=size,
        height=size,
        shape=shape,
        size=obj,
        velocity=(di, dj),
        start=start,
        n_frames=n_frames,
        background=float(rng.uniform(0.05, 0.3)),
        object_intensity=float(rng.uniform(0.9, 1.0)),
        noise_sigma=noise_sigma,
        seed=seed,
        wrap=False,
    )
    raw, gts = synth_generate(spec)
    frames = [f[:, :, 0] / 255.0 for f in raw]
    masks = [g == GtLabel.MOVING for g in gts]
    return LabelledSequence(frames, label, masks, seed)


def direction_suite(
    n_per_direction: int = 100,
    train_fraction: float = 0.75,
    seed: int = 0,
    size: int = 40,
    n_frames: int = 20,
    noise_sigma: float = 0.01,
):
    """Seeded train/test split of labelled sequences, balanced over the four directions."""
    if not 0 < train_fraction < 1:
        raise BenchError("train_fraction must be in (0, 1)")
    ss = np.random.SeedSequence(seed)
    train, test = [], []
    n_train = int(round(n_per_direction * train_fraction))
    for label in imaging.DIRECTIONS:
        child = ss.spawn(1)[0]
        seeds = child.generate_state(n_per_direction)
        seqs = [direction_sequence(label, int(s), size, n_frames, noise_sigma) for s in seeds]
        train += seqs[:n_train]
        test += seqs[n_train:]
    return train, test
