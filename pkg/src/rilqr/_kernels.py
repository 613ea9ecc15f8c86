"""Compiled Givens sweeps for the rank-1 QR update.

All routines operate in place on C-contiguous float64 arrays.
"""
import math

import numpy as np
from numba import njit


@njit(cache=True, inline="always")
def _givens(a, b):
    # rotation [c s; -s c] mapping (a, b) -> (r, 0)
    if b == 0.0:
        return 1.0, 0.0
    aa = abs(a)
    ab = abs(b)
    big = aa if aa > ab else ab
    if 1e-150 < big < 1e150:
        r = math.sqrt(a * a + b * b)
    else:
        r = math.hypot(a, b)
    inv = 1.0 / r
    return a * inv, b * inv


@njit(cache=True)
def rank1_update_inplace(q, r, u, v, cos_j, sin_j, cos_g, sin_g):
    """Overwrite (q, r) with the factors of q @ r + outer(u, v).

    ``q`` is (nc, nc) orthogonal, ``r`` is (nc, s) upper trapezoidal.
    Rotation cosines/sines of the two sweeps are written to the
    ``*_j`` (bottom-up, length nc - 1) and ``*_g`` (top-down, length
    min(s, nc - 1)) buffers; entry ``k`` acts on planes (k, k + 1).
    """
    nc = q.shape[0]
    s = r.shape[1]

    w = np.zeros(nc)
    for j in range(nc):
        uj = u[j]
        if uj != 0.0:
            for i in range(nc):
                w[i] += q[j, i] * uj

    # bottom-up sweep: w -> +-||w|| e1, r becomes upper Hessenberg
    for k in range(nc - 2, -1, -1):
        c, sn = _givens(w[k], w[k + 1])
        cos_j[k] = c
        sin_j[k] = sn
        if sn == 0.0:
            continue
        w[k] = c * w[k] + sn * w[k + 1]
        w[k + 1] = 0.0
        if k < s:
            for j in range(k, s):
                a = r[k, j]
                b = r[k + 1, j]
                r[k, j] = c * a + sn * b
                r[k + 1, j] = -sn * a + c * b
        for i in range(nc):
            a = q[i, k]
            b = q[i, k + 1]
            q[i, k] = c * a + sn * b
            q[i, k + 1] = -sn * a + c * b

    w0 = w[0]
    for j in range(s):
        r[0, j] += w0 * v[j]

    # top-down sweep: remove the subdiagonal
    ng = min(s, nc - 1)
    for k in range(ng):
        c, sn = _givens(r[k, k], r[k + 1, k])
        cos_g[k] = c
        sin_g[k] = sn
        if sn == 0.0:
            continue
        for j in range(k, s):
            a = r[k, j]
            b = r[k + 1, j]
            r[k, j] = c * a + sn * b
            r[k + 1, j] = -sn * a + c * b
        r[k + 1, k] = 0.0
        for i in range(nc):
            a = q[i, k]
            b = q[i, k + 1]
            q[i, k] = c * a + sn * b
            q[i, k + 1] = -sn * a + c * b

    normalize_signs_inplace(q, r)


@njit(cache=True)
def rank1_update(q, r, u, v, rot):
    """Validate and apply a rank-1 update to (q, r) in place.

    ``rot`` is a (4, nc) scratch buffer receiving the rotations:
    rows 0/1 hold the bottom-up cosines/sines, rows 2/3 the top-down
    ones. Returns 0 on success, 1 for non-finite input and 2 for a
    zero update (nothing touched).
    """
    nc = q.shape[0]
    s = r.shape[1]
    u_nz = False
    v_nz = False
    for i in range(nc):
        if not math.isfinite(u[i]):
            return 1
        if u[i] != 0.0:
            u_nz = True
    for j in range(s):
        if not math.isfinite(v[j]):
            return 1
        if v[j] != 0.0:
            v_nz = True
    if not (u_nz and v_nz):
        return 2
    rank1_update_inplace(q, r, u, v, rot[0], rot[1], rot[2], rot[3])
    return 0


@njit(cache=True)
def rank1_update_stream(q, r, us, vs, rot):
    """Apply the updates ``outer(us[i], vs[i])`` in order, in place.

    Returns the index of the first row with non-finite data, or -1.
    Zero updates are skipped.
    """
    for i in range(us.shape[0]):
        status = rank1_update(q, r, us[i], vs[i], rot)
        if status == 1:
            return i
    return -1


@njit(cache=True)
def normalize_signs_inplace(q, r):
    """Flip row i of r and column i of q wherever r[i, i] < 0."""
    nc = q.shape[0]
    s = r.shape[1]
    for i in range(min(s, nc)):
        if r[i, i] < 0.0:
            for j in range(i, s):
                r[i, j] = -r[i, j]
            for k in range(nc):
                q[k, i] = -q[k, i]


@njit(cache=True)
def simulate_open_loop(a, b, x0, u, e, limit):
    """States x(0..T) of x(t+1) = a x(t) + b u(t) + e(t).

    Returns (states, t_fail) where t_fail is the first index whose state
    norm exceeds ``limit`` (-1 if none); simulation stops there.
    """
    T = u.shape[0]
    n = a.shape[0]
    m = b.shape[1]
    x = np.zeros((T + 1, n))
    x[0] = x0
    for t in range(T):
        nrm = 0.0
        for i in range(n):
            acc = e[t, i]
            for j in range(n):
                acc += a[i, j] * x[t, j]
            for j in range(m):
                acc += b[i, j] * u[t, j]
            x[t + 1, i] = acc
            nrm += acc * acc
        if not math.sqrt(nrm) <= limit:
            return x, t + 1
    return x, -1
