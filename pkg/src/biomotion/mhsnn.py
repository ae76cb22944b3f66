"""Direction-sensitive spiking network and the centre-of-mass baseline.

Layers, for an ``l`` x ``w`` input and ``m_f`` movement features::

    input   binary plane, spike where intensity >= 0.85
    L1      (l-2)(w-2)   DoG receptive fields over the input (edges)
    L2      m_f maps of (l-4)(w-4), directional 3x3 kernels over L1
    L3      populations A and B per feature; each neuron compares the present
            L2 spikes on its centre line with L2 spikes delayed by 1 (A) or
            2 (B) steps on the centre line and on the line the edge would have
            come from had it moved the wrong way
    L4      one cell per feature, excited by its own A/B populations and
            inhibited by the opposite direction's, through trained weights

Every layer advances one step per frame. L1 to L3 use fixed weights and
memoryless neurons, so their rasters are computed once per sequence; only L4
is simulated during training.
"""

from __future__ import annotations

import csv
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import imaging, kernels
from .lif import LifParams, layer_new, step

LABELS = ("leftwards", "rightwards", "upwards", "downwards", "none")
DIRECTION_LABEL = dict(zip(imaging.DIRECTIONS, LABELS))
LABEL_DIRECTION = {v: k for k, v in DIRECTION_LABEL.items()}
# unit step of an edge moving in each direction, (di, dj)
STEP = {"left": (0, -1), "right": (0, 1), "up": (-1, 0), "down": (1, 0)}
AXIS = {"horizontal": ("left", "right"), "vertical": ("up", "down")}
INPUT_THRESHOLD = 0.85


class MhsnnError(ValueError):
    pass


# -- topology ----------------------------------------------------------------


@dataclass(frozen=True)
class Topology:
    l: int
    w: int
    m_f: int
    n_neurons: int
    n_synapses: int
    f_l: int = 3
    f_w: int = 3


def topology_counts(l: int, w: int, m_f: int = 4, f_l: int = 3, f_w: int = 3) -> Topology:
    """Closed-form neuron and synapse counts."""
    if l < 5 or w < 5:
        raise MhsnnError(f"image too small: need l, w >= 5, got {l}x{w}")
    if m_f < 0:
        raise MhsnnError("m_f must be >= 0")
    n1 = (l - 2) * (w - 2)
    n2 = (l - 4) * (w - 4)
    neurons = n1 + 3 * m_f * n2 + m_f
    synapses = f_l * f_w * (n1 + 3 * m_f * n2) + 4 * m_f * n2
    return Topology(l, w, m_f, neurons, synapses, f_l, f_w)


# -- parameters --------------------------------------------------------------

# memoryless units: tau_m = dt makes v equal the step's input
FEATURE_LIF = LifParams(e_l=0.0, v_reset=-1.0, v_min=-1.0, v_th=1e-3, tau_m=1.0, t_ref=0.0)
DETECTOR_LIF = FEATURE_LIF.with_(v_th=30.0)


@dataclass(frozen=True)
class ResumeParams:
    a_d: float = 0.01
    a_l: float = 0.01
    tau_d: float = 20.0
    tau_l: float = 20.0
    a_bias: float = 0.01
    lr: float = 1.0

    def __post_init__(self):
        if self.tau_d <= 0 or self.tau_l <= 0:
            raise MhsnnError("ReSuMe time constants must be > 0")
        if self.a_d < 0 or self.a_l < 0:
            raise MhsnnError("window amplitudes are magnitudes; sign comes from the synapse kind")


def resume_window(s: float, kind: str = "excitatory", p: ResumeParams = ResumeParams(), which: str = "d") -> float:
    """Learning window ``A exp(-s / tau)`` for ``s > 0``, else 0; negative for inhibitory synapses."""
    if kind not in ("excitatory", "inhibitory"):
        raise MhsnnError(f"kind must be excitatory or inhibitory, got {kind!r}")
    amp, tau = (p.a_d, p.tau_d) if which == "d" else (p.a_l, p.tau_l)
    if s <= 0:
        return 0.0
    sign = 1.0 if kind == "excitatory" else -1.0
    return sign * amp * float(np.exp(-s / tau))


def resume_delta(pre_spike_times, now: float, out_spike: bool, teacher_spike: bool, kind="excitatory", p=ResumeParams()):
    """Change of one synapse's weight magnitude at time ``now``.

    ``pre_spike_times`` must not lie in the future. Only the learning window
    depends on the synapse kind; the non-Hebbian ``a_bias`` is the same for
    both.
    """
    times = np.atleast_1d(np.asarray(pre_spike_times, dtype=np.float64))
    if times.size and times.max() > now:
        raise MhsnnError("pre-synaptic spike times must be <= now")
    d, o = float(teacher_spike), float(out_spike)
    hebb_d = sum(resume_window(now - t, kind, p, "d") for t in times)
    hebb_l = sum(resume_window(now - t, kind, p, "l") for t in times)
    return p.lr * (d * (p.a_bias + hebb_d) - o * (p.a_bias + hebb_l))


def resume_step(weights, pre_spike_times, now, out_spike, teacher_spike, kinds=None, p=ResumeParams()):
    """Apply :func:`resume_delta` to each synapse; weights are magnitudes, clamped at 0."""
    weights = np.asarray(weights, dtype=np.float64)
    kinds = kinds or ["excitatory"] * len(weights)
    delta = np.array(
        [resume_delta(t, now, out_spike, teacher_spike, k, p) for t, k in zip(pre_spike_times, kinds)]
    )
    return np.maximum(weights + delta, 0.0)


# -- network -----------------------------------------------------------------


@dataclass
class Synapses:
    pre: np.ndarray
    post: np.ndarray
    weight: np.ndarray
    delay: np.ndarray

    def __len__(self) -> int:
        return len(self.pre)

    def currents(self, sources: dict[int, np.ndarray], n_post: int) -> np.ndarray:
        out = np.zeros(n_post)
        for d, x in sources.items():
            sel = self.delay == d
            out += np.bincount(self.post[sel], weights=self.weight[sel] * x[self.pre[sel]], minlength=n_post)
        return out


def _kernel_synapses(in_h, in_w, kernel, pre_offset=0, post_offset=0):
    kh, kw = kernel.shape
    oh, ow = in_h - kh + 1, in_w - kw + 1
    i, j, a, b = np.meshgrid(np.arange(oh), np.arange(ow), np.arange(kh), np.arange(kw), indexing="ij")
    post = (i * ow + j).ravel() + post_offset
    pre = ((i + a) * in_w + (j + b)).ravel() + pre_offset
    weight = kernel[a, b].ravel().astype(np.float64)
    return Synapses(pre, post, weight, np.zeros_like(pre))


def _delay_synapses(h, w, direction, delay, w_exc, w_inh, pre_offset, post_offset):
    """Nine synapses per neuron on one L2 map, wrapping at the map border."""
    di, dj = STEP[direction]
    ii, jj = np.meshgrid(np.arange(h), np.arange(w), indexing="ij")
    post_base = (ii * w + jj).ravel()
    # centre line runs perpendicular to the motion
    across = (1, 0) if di == 0 else (0, 1)
    pre, post, weight, dly = [], [], [], []
    for off_i, off_j, wt, d in (
        (0, 0, w_exc, 0),
        (0, 0, -w_inh, delay),
        # the edge would have come from here had it moved the other way
        (delay * di, delay * dj, -w_inh, delay),
    ):
        for k in (-1, 0, 1):
            si = (ii + off_i + k * across[0]) % h
            sj = (jj + off_j + k * across[1]) % w
            pre.append((si * w + sj).ravel() + pre_offset)
            post.append(post_base + post_offset)
            weight.append(np.full(h * w, wt))
            dly.append(np.full(h * w, d))
    return Synapses(*(np.concatenate(x) for x in (pre, post, weight, dly)))


def _merge(parts: list[Synapses]) -> Synapses:
    if not parts:
        z = np.zeros(0, dtype=np.intp)
        return Synapses(z, z, np.zeros(0), z)
    return Synapses(*(np.concatenate([getattr(p, f) for p in parts]) for f in ("pre", "post", "weight", "delay")))


@dataclass
class ForwardResult:
    input: np.ndarray  # (T, l, w) bool
    l1: np.ndarray  # (T, n1) bool
    l2: np.ndarray  # (T, m_f, n_pos) bool
    l3: np.ndarray  # (T, 2, m_f, n_pos) bool, population A then B
    l4: np.ndarray  # (T, m_f) bool

    @property
    def l4_counts(self) -> np.ndarray:
        return self.l4.astype(np.int64)


@dataclass
class MhsnnNetwork:
    l: int
    w: int
    m_f: int = 4
    dog_sigma: float = 0.5
    dog_ratio: float = 1.6
    w_exc: float = 1.0
    w_inh: float = 3.0
    feature_lif: LifParams = FEATURE_LIF
    detector_lif: LifParams = DETECTOR_LIF
    weights_l4: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        if self.l < 5 or self.w < 5:
            raise MhsnnError(f"image too small: need l, w >= 5, got {self.l}x{self.w}")
        if not 0 <= self.m_f <= 4:
            raise MhsnnError(f"m_f must be in [0, 4], got {self.m_f}")
        self.directions = imaging.DIRECTIONS[: self.m_f]
        self.n1 = (self.l - 2) * (self.w - 2)
        self.pos_shape = (self.l - 4, self.w - 4)
        self.n_pos = self.pos_shape[0] * self.pos_shape[1]
        self.syn_l1 = _kernel_synapses(self.l, self.w, imaging.dog_kernel(3, self.dog_sigma, self.dog_ratio))
        self.syn_l2 = _merge(
            [
                _kernel_synapses(self.l - 2, self.w - 2, imaging.directional_kernel(d), 0, k * self.n_pos)
                for k, d in enumerate(self.directions)
            ]
        )
        parts = []
        for pop, delay in enumerate((1, 2)):
            for k, d in enumerate(self.directions):
                post_off = (pop * self.m_f + k) * self.n_pos
                parts.append(_delay_synapses(*self.pos_shape, d, delay, self.w_exc, self.w_inh, k * self.n_pos, post_off))
        self.syn_l3 = _merge(parts)
        # L4 source populations per cell: own A, own B, partner A, partner B
        pops = []
        for k in range(self.m_f):
            partner = k ^ 1 if (k ^ 1) < self.m_f else k
            pops.append([k, self.m_f + k, partner, self.m_f + partner])
        self.cell_pops = np.array(pops, dtype=np.int64).reshape(self.m_f, 4)
        if self.weights_l4 is None:
            self.weights_l4 = np.ones((self.m_f, 4 * self.n_pos))
        elif self.weights_l4.shape != (self.m_f, 4 * self.n_pos):
            raise MhsnnError(f"weights_l4 must have shape {(self.m_f, 4 * self.n_pos)}")

    @property
    def n_l3(self) -> int:
        return 2 * self.m_f * self.n_pos

    def neuron_count(self) -> int:
        return self.n1 + self.m_f * self.n_pos + self.n_l3 + self.m_f

    def synapse_count(self) -> int:
        return len(self.syn_l1) + len(self.syn_l2) + len(self.syn_l3) + self.weights_l4.size

    def reset_weights(self, value: float = 1.0) -> None:
        self.weights_l4 = np.full((self.m_f, 4 * self.n_pos), value)

    def _check(self, frames) -> list[np.ndarray]:
        frames = [imaging.check_gray(f) for f in frames]
        for f in frames:
            if f.shape != (self.l, self.w):
                raise MhsnnError(f"frame {f.shape} does not match network {(self.l, self.w)}")
        return frames

    def features(self, frames):
        """Input, L1, L2 and L3 rasters; these layers have fixed weights."""
        frames = self._check(frames)
        t_n = len(frames)
        inp = np.zeros((t_n, self.l, self.w), dtype=bool)
        r1 = np.zeros((t_n, self.n1), dtype=bool)
        r2 = np.zeros((t_n, self.m_f * self.n_pos), dtype=bool)
        r3 = np.zeros((t_n, self.n_l3), dtype=bool)
        l1 = layer_new(self.n1, self.feature_lif)
        l2 = layer_new(max(1, self.m_f * self.n_pos), self.feature_lif)
        l3 = layer_new(max(1, self.n_l3), self.feature_lif)
        for t, frame in enumerate(frames):
            inp[t] = encode_input(frame)
            r1[t] = step(l1, self.syn_l1.currents({0: inp[t].ravel().astype(np.float64)}, self.n1))
            if not self.m_f:
                continue
            r2[t] = step(l2, self.syn_l2.currents({0: r1[t].astype(np.float64)}, l2.n))
            # delay lines start out holding the first frame's L2 output
            src = {d: r2[max(t - d, 0)].astype(np.float64) for d in (0, 1, 2)}
            r3[t] = step(l3, self.syn_l3.currents(src, l3.n))
        return inp, r1, r2.reshape(t_n, self.m_f, self.n_pos), r3

    def forward(self, frames) -> ForwardResult:
        inp, r1, r2, r3 = self.features(frames)
        out = run_detectors(self, r3)
        return ForwardResult(inp, r1, r2, r3.reshape(len(r3), 2, self.m_f, self.n_pos), out)


def encode_input(frame) -> np.ndarray:
    return np.asarray(frame, dtype=np.float64) >= INPUT_THRESHOLD


def _csr(raster: np.ndarray):
    t_idx, j_idx = np.nonzero(raster)
    ptr = np.searchsorted(t_idx, np.arange(raster.shape[0] + 1))
    return j_idx.astype(np.int64), ptr.astype(np.int64)


def run_detectors(net: MhsnnNetwork, l3_raster, teacher=None, p: ResumeParams | None = None, learn=None):
    """Simulate the L4 cells on an L3 raster, optionally learning in place."""
    t_n = len(l3_raster)
    out = np.zeros((t_n, net.m_f), dtype=np.uint8)
    if not net.m_f:
        return out.astype(bool)
    idx, ptr = _csr(np.asarray(l3_raster).reshape(t_n, -1))
    p = p or ResumeParams()
    if teacher is None:
        teacher = np.zeros((t_n, net.m_f), dtype=np.uint8)
    if learn is None:
        learn = np.zeros(net.m_f, dtype=np.uint8)
    kernels.l4_run(
        idx, ptr, net.n_l3, np.ascontiguousarray(teacher, dtype=np.uint8), net.weights_l4, net.cell_pops,
        net.n_pos, net.detector_lif, 1.0, p.a_d, p.a_l, p.tau_d, p.tau_l, p.a_bias, p.lr,
        np.asarray(learn, dtype=np.uint8), out,
    )
    return out.astype(bool)


# -- training and classification ---------------------------------------------


def teacher_train(label: str, n_frames: int, directions) -> np.ndarray:
    """Teacher spikes for every frame after the first, on the labelled cell only."""
    if label not in LABEL_DIRECTION and label not in imaging.DIRECTIONS:
        raise MhsnnError(f"unlabelled or unknown label {label!r}")
    d = LABEL_DIRECTION.get(label, label)
    out = np.zeros((n_frames, len(directions)), dtype=np.uint8)
    if d in directions:
        out[1:, directions.index(d)] = 1
    return out


def _label_of(seq) -> str:
    label = getattr(seq, "label", None)
    if label is None:
        raise MhsnnError("sequence carries no direction label")
    return label


def train(net: MhsnnNetwork, sequences, p: ResumeParams | None = None, iterations: int = 200,
          schedule: str = "concurrent", log=None) -> MhsnnNetwork:
    """ReSuMe training of the L4 weights from 1.0; other layers stay fixed.

    Each iteration presents every sequence once, in the given order.
    ``schedule="sequential"`` spends the first half of the iterations on the
    horizontal cells and the second half on the vertical ones. ``log`` (a
    list) receives each cell's mean weight after every iteration.
    """
    if schedule not in ("concurrent", "sequential"):
        raise MhsnnError(f"schedule must be concurrent or sequential, got {schedule!r}")
    if iterations < 0:
        raise MhsnnError("iterations must be >= 0")
    p = p or ResumeParams()
    net.reset_weights(1.0)
    prepared = []
    for seq in sequences:
        label = _label_of(seq)
        raster = net.features(seq.frames)[3]
        prepared.append((raster, teacher_train(label, len(seq.frames), net.directions)))
    horiz = np.array([d in AXIS["horizontal"] for d in net.directions], dtype=np.uint8)
    for it in range(iterations):
        if schedule == "concurrent":
            learn = np.ones(net.m_f, dtype=np.uint8)
        else:
            learn = horiz if it < iterations // 2 else 1 - horiz
        for raster, teacher in prepared:
            run_detectors(net, raster, teacher, p, learn)
        if log is not None:
            log.append(net.weights_l4.mean(axis=1).copy())
    return net


def decide(counts, directions, axis: str | None = None) -> str:
    """Label with the strictly largest count; ties and silence give ``none``."""
    counts = np.asarray(counts)
    allowed = [k for k, d in enumerate(directions) if axis is None or d in AXIS[axis]]
    if not allowed:
        return "none"
    sub = counts[allowed]
    best = sub.max()
    if best <= 0 or np.count_nonzero(sub == best) > 1:
        return "none"
    return DIRECTION_LABEL[directions[allowed[int(np.argmax(sub))]]]


def classify(net: MhsnnNetwork, frames, window: int | None = None, axis: str | None = None) -> list[str]:
    """One label per consecutive window of frames (whole sequence by default)."""
    spikes = net.forward(frames).l4
    window = window or len(spikes)
    return [decide(spikes[s : s + window].sum(axis=0), net.directions, axis) for s in range(0, len(spikes), window)]


def classify_pairs(net: MhsnnNetwork, frames, window: int | None = None):
    """Horizontal and vertical labels decided independently per window."""
    h = classify(net, frames, window, "horizontal")
    v = classify(net, frames, window, "vertical")
    return list(zip(h, v))


# -- centre-of-mass baseline -------------------------------------------------


def codd_direction(mask, prev_cm=None):
    """Direction from the shift of the foreground centroid.

    Returns ``(horizontal, vertical, cm)``; an empty mask yields ``none`` for
    both and carries ``prev_cm`` forward.
    """
    mask = np.asarray(mask) != 0
    if not mask.any():
        return "none", "none", prev_cm
    ii, jj = np.nonzero(mask)
    cm = (float(ii.mean()), float(jj.mean()))
    if prev_cm is None:
        return "none", "none", cm
    dj = cm[1] - prev_cm[1]
    di = cm[0] - prev_cm[0]
    horiz = "rightwards" if dj > 0 else "leftwards" if dj < 0 else "none"
    vert = "downwards" if di > 0 else "upwards" if di < 0 else "none"
    return horiz, vert, cm


def codd_sequence(masks):
    cm = None
    out = []
    for m in masks:
        h, v, cm = codd_direction(m, cm)
        out.append((h, v))
    return out


def pcc_pwc(tp: int, fp: int) -> tuple[float, float]:
    if tp < 0 or fp < 0:
        raise MhsnnError("counts must be >= 0")
    if tp + fp == 0:
        raise MhsnnError("pcc/pwc undefined for zero classifications")
    pcc = 100.0 * tp / (tp + fp)
    return pcc, 100.0 - pcc


# -- weights I/O -------------------------------------------------------------

MAGIC = b"MHSN"
VERSION = 1
_HEADER = struct.Struct("<4sIQ")


def save_weights(path, weights) -> None:
    flat = np.ascontiguousarray(weights, dtype="<f8").ravel()
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, VERSION, flat.size))
        fh.write(flat.tobytes())


def load_weights(path) -> np.ndarray:
    data = Path(path).read_bytes()
    if len(data) < _HEADER.size:
        raise MhsnnError("weights file too short")
    magic, version, n = _HEADER.unpack_from(data)
    if magic != MAGIC:
        raise MhsnnError(f"bad magic {magic!r}")
    if version != VERSION:
        raise MhsnnError(f"unsupported weights version {version}")
    if len(data) != _HEADER.size + 8 * n:
        raise MhsnnError(f"expected {n} weights, file holds {(len(data) - _HEADER.size) // 8}")
    return np.frombuffer(data, dtype="<f8", offset=_HEADER.size).astype(np.float64)


def export_weights_csv(path, net: MhsnnNetwork) -> None:
    groups = ("own_a", "own_b", "partner_a", "partner_b")
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["cell", "group", "position", "weight"])
        for c, d in enumerate(net.directions):
            for q, g in enumerate(groups):
                for pos in range(net.n_pos):
                    writer.writerow([d, g, pos, repr(float(net.weights_l4[c, q * net.n_pos + pos]))])
