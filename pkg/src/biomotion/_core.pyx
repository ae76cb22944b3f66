# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled versions of the kernels in ``_fallback.py``.

The arithmetic is written out in the same order as the numpy code so that
results are bit-identical; build without fast-math or FMA contraction.
"""

import numpy as np

cimport numpy as cnp

cnp.import_array()

cdef double REFRACTORY_SNAP = 1e-9


cdef inline int lif1(double *v, double *r, long long *cnt, double cur,
                     double k, double e_l, double r_m, double v_reset,
                     double v_min, double v_th, double t_ref, double dt,
                     double snap) noexcept nogil:
    cdef double vn
    if r[0] > 0.0:
        r[0] = r[0] - dt
        if r[0] < snap:
            r[0] = 0.0
        return 0
    vn = v[0] + k * ((e_l - v[0]) + r_m * cur)
    if vn < v_min:
        vn = v_min
    if vn >= v_th:
        v[0] = v_reset
        r[0] = t_ref
        cnt[0] += 1
        return 1
    v[0] = vn
    return 0


cdef void _chain(const double[::1] currents, double[:, ::1] v, double[:, ::1] refr,
                 long long[:, ::1] counts, unsigned char[::1] buf,
                 const Py_ssize_t[::1] idx, bint use_idx, Py_ssize_t lo, Py_ssize_t hi,
                 double k, double e_l, double r_m, double v_reset, double v_min,
                 double v_th, double t_ref, double dt,
                 double w23, double w24, double w34, int steps) noexcept nogil:
    cdef Py_ssize_t a, i
    cdef int s, s2, s3
    cdef double prev, cur
    cdef double snap = REFRACTORY_SNAP * dt
    for a in range(lo, hi):
        i = idx[a] if use_idx else a
        cur = currents[i]
        prev = <double>buf[i]
        for s in range(steps):
            s2 = lif1(&v[0, i], &refr[0, i], &counts[0, i], cur,
                      k, e_l, r_m, v_reset, v_min, v_th, t_ref, dt, snap)
            s3 = lif1(&v[1, i], &refr[1, i], &counts[1, i], w23 * prev,
                      k, e_l, r_m, v_reset, v_min, v_th, t_ref, dt, snap)
            lif1(&v[2, i], &refr[2, i], &counts[2, i], w24 * <double>s2 + w34 * <double>s3,
                 k, e_l, r_m, v_reset, v_min, v_th, t_ref, dt, snap)
            prev = <double>s2
        buf[i] = <unsigned char>prev


def hsmd_chain(currents, v, refr, counts, buf, idx, p, double dt,
               double w23, double w24, double w34, int steps):
    cdef const double[::1] cur_mv = currents
    cdef double[:, ::1] v_mv = v
    cdef double[:, ::1] r_mv = refr
    cdef long long[:, ::1] c_mv = counts
    cdef unsigned char[::1] b_mv = buf
    cdef const Py_ssize_t[::1] idx_mv
    cdef bint use_idx = idx is not None
    cdef Py_ssize_t n
    if use_idx:
        idx_mv = idx
        n = idx_mv.shape[0]
    else:
        idx_mv = np.empty(0, dtype=np.intp)
        n = cur_mv.shape[0]
    cdef double k = dt / p.tau_m
    cdef double e_l = p.e_l, r_m = p.r_m, v_reset = p.v_reset, v_min = p.v_min
    cdef double v_th = p.v_th, t_ref = p.t_ref
    with nogil:
        _chain(cur_mv, v_mv, r_mv, c_mv, b_mv, idx_mv, use_idx, 0, n,
               k, e_l, r_m, v_reset, v_min, v_th, t_ref, dt, w23, w24, w34, steps)


def l4_run(pre_idx, pre_ptr, Py_ssize_t n_pre, teacher, weights, cell_pops,
           Py_ssize_t n_pos, p, double dt, double amp_d, double amp_l,
           double tau_d, double tau_l, double a_bias, double lr, learn, out):
    cdef const long long[::1] pidx = np.ascontiguousarray(pre_idx, dtype=np.int64)
    cdef const long long[::1] pptr = np.ascontiguousarray(pre_ptr, dtype=np.int64)
    cdef const unsigned char[:, ::1] teach = np.ascontiguousarray(teacher, dtype=np.uint8)
    cdef double[:, ::1] w = weights
    cdef const long long[:, ::1] pops = np.ascontiguousarray(cell_pops, dtype=np.int64)
    cdef const unsigned char[::1] lrn = np.ascontiguousarray(learn, dtype=np.uint8)
    cdef unsigned char[:, ::1] o = out
    cdef Py_ssize_t n_steps = teach.shape[0], n_cells = teach.shape[1]
    cdef double decay_d = float(np.exp(-dt / tau_d))
    cdef double decay_l = float(np.exp(-dt / tau_l))
    cdef bint same_window = amp_d == amp_l and tau_d == tau_l
    cdef double[::1] trace_d = np.zeros(n_pre)
    cdef double[::1] trace_l = np.zeros(n_pre)
    cdef double[::1] vv = np.full(n_cells, p.e_l, dtype=np.float64)
    cdef double[::1] rr = np.zeros(n_cells)
    cdef long long[::1] cc = np.zeros(n_cells, dtype=np.int64)
    cdef double[::1] cur = np.zeros(n_cells)
    cdef unsigned char[::1] spk = np.zeros(n_cells, dtype=np.uint8)
    cdef double k = dt / p.tau_m
    cdef double e_l = p.e_l, r_m = p.r_m, v_reset = p.v_reset, v_min = p.v_min
    cdef double v_th = p.v_th, t_ref = p.t_ref
    cdef double snap = REFRACTORY_SNAP * dt
    cdef double signs[4]
    signs[0] = 1.0
    signs[1] = 1.0
    signs[2] = -1.0
    signs[3] = -1.0
    cdef Py_ssize_t t, c, q, a, j, pop, base, prev_lo = 0, prev_hi = 0, lo, hi
    cdef double acc, ad, al, dd, oo
    with nogil:
        for t in range(n_steps):
            for j in range(n_pre):
                trace_d[j] = trace_d[j] * decay_d
                trace_l[j] = trace_l[j] * decay_l
            for a in range(prev_lo, prev_hi):
                j = pidx[a]
                trace_d[j] += decay_d
                trace_l[j] += decay_l
            lo = pptr[t]
            hi = pptr[t + 1]
            for c in range(n_cells):
                acc = 0.0
                for q in range(4):
                    pop = pops[c, q]
                    for a in range(lo, hi):
                        j = pidx[a]
                        if j >= pop * n_pos and j < (pop + 1) * n_pos:
                            acc = acc + signs[q] * w[c, q * n_pos + (j - pop * n_pos)]
                cur[c] = acc
            for c in range(n_cells):
                spk[c] = <unsigned char>lif1(&vv[c], &rr[c], &cc[c], cur[c], k, e_l, r_m,
                                             v_reset, v_min, v_th, t_ref, dt, snap)
                o[t, c] = spk[c]
            for c in range(n_cells):
                if not lrn[c]:
                    continue
                dd = <double>teach[t, c]
                oo = 1.0 if spk[c] else 0.0
                if dd == 0.0 and oo == 0.0:
                    continue
                if dd == oo and same_window:
                    continue
                for q in range(4):
                    pop = pops[c, q]
                    ad = signs[q] * amp_d
                    al = signs[q] * amp_l
                    base = q * n_pos
                    for j in range(n_pos):
                        w[c, base + j] = w[c, base + j] + lr * (
                            dd * (a_bias + ad * trace_d[pop * n_pos + j])
                            - oo * (a_bias + al * trace_l[pop * n_pos + j]))
                        if w[c, base + j] < 0.0:
                            w[c, base + j] = 0.0
            prev_lo = lo
            prev_hi = hi
