"""Pure numpy implementations of the hot kernels.

Each function has the same signature and the same floating point operation
order as its counterpart in ``_core.pyx``; the two are interchangeable and
agree bit for bit.
"""

from __future__ import annotations

import numpy as np

from .lif import LifParams, lif_update


def hsmd_chain(currents, v, refr, counts, buf, idx, p: LifParams, dt, w23, w24, w34, steps):
    """Run the L2 -> L3 -> L4 chain for ``steps`` inner steps.

    ``v``, ``refr`` and ``counts`` are ``(3, n)`` arrays holding layers 2, 3
    and 4; ``buf`` holds each pixel's L2 spike from the previous inner step.
    Only pixels listed in ``idx`` are touched (all of them when ``idx`` is None).
    """
    if idx is None:
        vv, rr, cc, prev, cur = v, refr, counts, buf.astype(np.float64), currents
    else:
        vv, rr, cc = v[:, idx], refr[:, idx], counts[:, idx]
        prev, cur = buf[idx].astype(np.float64), currents[idx]
    for _ in range(steps):
        s2 = lif_update(vv[0], rr[0], cc[0], cur, p, dt).astype(np.float64)
        s3 = lif_update(vv[1], rr[1], cc[1], w23 * prev, p, dt).astype(np.float64)
        lif_update(vv[2], rr[2], cc[2], w24 * s2 + w34 * s3, p, dt)
        prev = s2
    if idx is None:
        buf[:] = prev.astype(np.uint8)
    else:
        v[:, idx], refr[:, idx], counts[:, idx] = vv, rr, cc
        buf[idx] = prev.astype(np.uint8)


def l4_run(
    pre_idx,
    pre_ptr,
    n_pre,
    teacher,
    weights,
    cell_pops,
    n_pos,
    p: LifParams,
    dt,
    amp_d,
    amp_l,
    tau_d,
    tau_l,
    a_bias,
    lr,
    learn,
    out,
):
    """Drive the direction cells from a recorded layer-3 raster.

    ``pre_idx[pre_ptr[t]:pre_ptr[t + 1]]`` lists, in ascending order, the
    layer-3 neurons (global index ``pop * n_pos + pos``, below ``n_pre``)
    that spiked at step ``t``. ``weights[c]``
    holds magnitudes for the four source populations ``cell_pops[c]``: own A
    and own B are excitatory, the paired direction's A and B inhibitory. When
    ``learn[c]`` is set the remote-supervision update is applied to cell ``c``
    against ``teacher[t, c]``: every magnitude moves by
    ``lr * (d * (a_bias + A_d * trace_d) - o * (a_bias + A_l * trace_l))`` with
    the amplitudes negated for the inhibitory groups. Output spikes are written to ``out``.
    """
    n_steps, n_cells = teacher.shape
    decay_d = np.exp(-dt / tau_d)
    decay_l = np.exp(-dt / tau_l)
    same_window = amp_d == amp_l and tau_d == tau_l
    trace_d = np.zeros(n_pre)
    trace_l = np.zeros(n_pre)
    v = np.full(n_cells, p.e_l)
    refr = np.zeros(n_cells)
    counts = np.zeros(n_cells, dtype=np.int64)
    signs = (1.0, 1.0, -1.0, -1.0)
    prev = pre_idx[0:0]
    for t in range(n_steps):
        trace_d *= decay_d
        trace_d[prev] += decay_d
        trace_l *= decay_l
        trace_l[prev] += decay_l
        active = pre_idx[pre_ptr[t] : pre_ptr[t + 1]]
        currents = np.zeros(n_cells)
        for c in range(n_cells):
            parts = []
            for q in range(4):
                pop = cell_pops[c, q]
                pos = active[(active >= pop * n_pos) & (active < (pop + 1) * n_pos)] - pop * n_pos
                parts.append(signs[q] * weights[c, q * n_pos + pos])
            flat = np.concatenate(parts)
            # sequential left-to-right sum, matching the compiled loop
            currents[c] = np.cumsum(np.concatenate(([0.0], flat)))[-1]
        spikes = lif_update(v, refr, counts, currents, p, dt)
        out[t, :] = spikes
        for c in range(n_cells):
            if not learn[c]:
                continue
            dd = float(teacher[t, c])
            oo = 1.0 if spikes[c] else 0.0
            if dd == 0.0 and oo == 0.0:
                continue
            if dd == oo and same_window:
                continue
            for q in range(4):
                pop = cell_pops[c, q]
                ad = signs[q] * amp_d
                al = signs[q] * amp_l
                trd = trace_d[pop * n_pos : (pop + 1) * n_pos]
                trl = trace_l[pop * n_pos : (pop + 1) * n_pos]
                blk = weights[c, q * n_pos : (q + 1) * n_pos]
                blk[:] = blk + lr * (dd * (a_bias + ad * trd) - oo * (a_bias + al * trl))
                np.maximum(blk, 0.0, out=blk)
        prev = active
