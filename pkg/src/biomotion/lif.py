"""Leaky integrate-and-fire populations integrated with forward Euler.

Membrane update for a non-refractory neuron over one step ``dt``::

    v <- v + (dt / tau_m) * ((e_l - v) + r_m * I)

clamped at ``v_min``. Crossing ``v_th`` emits a spike, resets to ``v_reset``
and starts a refractory period of ``t_ref`` during which input is ignored.
Units are mV, ms, MOhm and nA, so ``r_m * I`` is directly in mV.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

# refractory timers below this fraction of dt are treated as expired
_REFRACTORY_SNAP = 1e-9


class LifError(ValueError):
    pass


@dataclass(frozen=True)
class LifParams:
    c_m: float = 10.0  # pF, informational only
    r_m: float = 1.0
    e_l: float = -55.0
    v_reset: float = -70.0
    v_min: float = -70.0
    v_th: float = -50.0
    tau_m: float = 10.0
    t_ref: float = 2.0

    def __post_init__(self):
        if not self.tau_m > 0:
            raise LifError(f"tau_m must be > 0, got {self.tau_m}")
        if not self.r_m > 0:
            raise LifError(f"r_m must be > 0, got {self.r_m}")
        if not (self.v_min <= self.v_reset <= self.e_l < self.v_th):
            raise LifError(
                "require v_min <= v_reset <= e_l < v_th, got "
                f"{self.v_min}, {self.v_reset}, {self.e_l}, {self.v_th}"
            )
        if self.t_ref < 0:
            raise LifError(f"t_ref must be >= 0, got {self.t_ref}")

    def with_(self, **changes) -> "LifParams":
        return replace(self, **changes)


@dataclass
class LifLayer:
    n: int
    params: LifParams
    v: np.ndarray = field(repr=False)
    refractory_left: np.ndarray = field(repr=False)
    spike_count: np.ndarray = field(repr=False)

    def reset(self, idx=None) -> None:
        """Return neurons (all, or those at ``idx``) to rest without touching tallies."""
        if idx is None:
            self.v.fill(self.params.e_l)
            self.refractory_left.fill(0.0)
        else:
            self.v[idx] = self.params.e_l
            self.refractory_left[idx] = 0.0


def layer_new(n: int, params: LifParams | None = None) -> LifLayer:
    if n < 1:
        raise LifError(f"layer needs at least one neuron, got n={n}")
    params = params or LifParams()
    return LifLayer(
        n=n,
        params=params,
        v=np.full(n, params.e_l, dtype=np.float64),
        refractory_left=np.zeros(n, dtype=np.float64),
        spike_count=np.zeros(n, dtype=np.int64),
    )


def lif_update(v, refr, counts, currents, p: LifParams, dt: float) -> np.ndarray:
    """In-place array update shared by :func:`step` and the numpy kernels.

    The arithmetic mirrors the compiled kernel operation for operation so the
    two paths agree bit for bit.
    """
    k = dt / p.tau_m
    refractory = refr > 0.0
    r_next = refr - dt
    r_next[r_next < _REFRACTORY_SNAP * dt] = 0.0
    v_next = v + k * ((p.e_l - v) + p.r_m * currents)
    np.maximum(v_next, p.v_min, out=v_next)
    spikes = (~refractory) & (v_next >= p.v_th)
    np.copyto(v, v_next, where=~refractory)
    v[spikes] = p.v_reset
    np.copyto(refr, r_next, where=refractory)
    refr[spikes] = p.t_ref
    counts += spikes
    return spikes


def step(layer: LifLayer, currents, dt: float = 1.0) -> np.ndarray:
    """Advance every neuron by ``dt`` ms; returns boolean spike flags."""
    currents = np.asarray(currents, dtype=np.float64)
    if currents.shape != (layer.n,):
        raise LifError(f"expected {layer.n} currents, got shape {currents.shape}")
    if not (0 < dt <= layer.params.tau_m):
        raise LifError(f"dt must satisfy 0 < dt <= tau_m, got {dt}")
    return lif_update(
        layer.v, layer.refractory_left, layer.spike_count, currents, layer.params, dt
    )


def take_spike_counts(layer: LifLayer) -> np.ndarray:
    counts = layer.spike_count.copy()
    layer.spike_count.fill(0)
    return counts


def max_spikes(n_steps: int, p: LifParams, dt: float) -> int:
    """Refractory-limited ceiling on spikes in ``n_steps`` steps."""
    return max(1, int(np.ceil(n_steps / (1.0 + p.t_ref / dt))))
