"""Dense kernels: sign-normalized QR, Givens rank-1 QR update,
cutoff pseudo-inverse application and truncated SVD."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from rilqr import _kernels
from rilqr.errors import DimensionError, NonFiniteError

DEFAULT_PINV_TOL = 1e-10
REORTH_EVERY = 1000


@dataclass
class QrFactorization:
    """Full QR factorization ``matrix = q @ r`` of an ``nc x s`` matrix.

    ``q`` is ``nc x nc`` orthogonal and ``r`` is ``nc x s`` upper
    trapezoidal with a non-negative diagonal. ``updates`` counts rank-1
    updates applied since the last fresh factorization.
    """

    q: np.ndarray
    r: np.ndarray
    updates: int = 0

    @property
    def nc(self) -> int:
        return self.q.shape[0]

    @property
    def s(self) -> int:
        return self.r.shape[1]

    def matrix(self) -> np.ndarray:
        """Reconstruct the factored matrix."""
        return self.q @ self.r

    def copy(self) -> "QrFactorization":
        return QrFactorization(self.q.copy(), self.r.copy(), self.updates)


@dataclass
class GivensPlan:
    """Ordered plane rotations of one sweep of a rank-1 update.

    Rotation ``i`` acts on planes ``(planes[i], planes[i] + 1)`` as
    ``[[c, s], [-s, c]]``.
    """

    planes: np.ndarray
    cos: np.ndarray
    sin: np.ndarray
    direction: str = "bottom-up"

    def __len__(self):
        return len(self.planes)

    def rotations(self):
        return [(int(k), float(c), float(s)) for k, c, s in zip(self.planes, self.cos, self.sin)]

    def matrix(self, size: int) -> np.ndarray:
        """Dense orthogonal matrix equal to the sweep applied to ``I``."""
        g = np.eye(size)
        for k, c, s in self.rotations():
            rot = np.array([[c, s], [-s, c]])
            g[k:k + 2, :] = rot @ g[k:k + 2, :]
        return g


def givens(a: float, b: float) -> tuple[float, float]:
    """Cosine and sine of the rotation taking ``(a, b)`` to ``(r, 0)``."""
    if b == 0.0:
        return 1.0, 0.0
    r = np.hypot(a, b)
    return a / r, b / r


def _finite(name, *arrays):
    for a in arrays:
        if not np.all(np.isfinite(a)):
            raise NonFiniteError(f"{name}: non-finite entries")


def qr_decompose(matrix) -> QrFactorization:
    """Complete QR of a tall matrix with non-negative ``diag(r)``.

    Raises
    ------
    DimensionError
        If the matrix has fewer rows than columns.
    """
    a = np.asarray(matrix, dtype=float)
    if a.ndim != 2:
        raise DimensionError(f"expected a 2-D matrix, got shape {a.shape}")
    nc, s = a.shape
    if nc < s:
        raise DimensionError(f"QR needs rows >= cols, got {nc} x {s}")
    _finite("qr_decompose", a)
    q, r = np.linalg.qr(a, mode="complete")
    q = np.ascontiguousarray(q)
    r = np.ascontiguousarray(r)
    # exact zeros below the diagonal
    r[np.tril_indices(nc, -1, s)] = 0.0
    _kernels.normalize_signs_inplace(q, r)
    return QrFactorization(q, r)


def reorthonormalize(fact: QrFactorization) -> QrFactorization:
    """Re-orthonormalize ``q`` by a fresh QR, folding the correction into ``r``."""
    q2, rq = np.linalg.qr(fact.q)
    signs = np.where(np.diag(rq) < 0.0, -1.0, 1.0)
    q2 = q2 * signs
    rq = signs[:, None] * rq
    r = rq @ fact.r
    r[np.tril_indices(fact.nc, -1, fact.s)] = 0.0
    q2 = np.ascontiguousarray(q2)
    r = np.ascontiguousarray(r)
    _kernels.normalize_signs_inplace(q2, r)
    return QrFactorization(q2, r, 0)


def rank1_qr_update(fact: QrFactorization, u, v, *, plans: list | None = None,
                    reorth_every: int | None = REORTH_EVERY) -> QrFactorization:
    """Factorization of ``fact.matrix() + outer(u, v)`` in O(nc**2).

    A bottom-up Givens sweep reduces ``q.T @ u`` to a multiple of
    ``e1``, which leaves ``r`` upper Hessenberg after the rank-1 term
    is added to its first row; a top-down sweep restores triangularity.
    ``q`` is re-orthonormalized every ``reorth_every`` updates.

    Parameters
    ----------
    fact : QrFactorization
        Factorization to update; left untouched.
    u : array_like, shape (nc,)
    v : array_like, shape (s,)
    plans : list, optional
        If given, the two sweeps are appended as :class:`GivensPlan`.
    reorth_every : int or None
        Re-orthonormalization period; ``None`` disables it.
    """
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    nc, s = fact.q.shape[0], fact.r.shape[1]
    if u.shape != (nc,) or v.shape != (s,):
        raise DimensionError(f"update vectors must have shapes ({nc},), ({s},); got {u.shape}, {v.shape}")
    q = fact.q.copy()
    r = fact.r.copy()
    rot = np.empty((4, nc))
    status = _kernels.rank1_update(q, r, u, v, rot)
    if status == 1:
        raise NonFiniteError("rank1_qr_update: non-finite entries")
    if status == 2:
        return QrFactorization(q, r, fact.updates)
    if plans is not None:
        ng = min(s, nc - 1)
        plans.append(GivensPlan(np.arange(nc - 2, -1, -1), rot[0, nc - 2::-1].copy(),
                                rot[1, nc - 2::-1].copy(), "bottom-up"))
        plans.append(GivensPlan(np.arange(ng), rot[2, :ng].copy(), rot[3, :ng].copy(), "top-down"))
    out = QrFactorization(q, r, fact.updates + 1)
    if reorth_every and out.updates >= reorth_every:
        out = reorthonormalize(out)
    return out


def rank1_qr_update_stream(fact: QrFactorization, us, vs) -> QrFactorization:
    """Apply ``outer(us[i], vs[i])`` for every row ``i`` in one compiled loop.

    Equivalent to repeated :func:`rank1_qr_update` without periodic
    re-orthonormalization or per-call validation overhead; zero
    updates are skipped. Used for throughput measurements.
    """
    us = np.ascontiguousarray(us, dtype=float)
    vs = np.ascontiguousarray(vs, dtype=float)
    nc, s = fact.nc, fact.s
    if us.ndim != 2 or vs.ndim != 2 or us.shape[1] != nc or vs.shape[1] != s or len(us) != len(vs):
        raise DimensionError(f"expected (T, {nc}) and (T, {s}) update rows, got {us.shape}, {vs.shape}")
    q = fact.q.copy()
    r = fact.r.copy()
    rot = np.empty((4, nc))
    bad = _kernels.rank1_update_stream(q, r, us, vs, rot)
    if bad >= 0:
        raise NonFiniteError(f"rank1_qr_update_stream: non-finite entries in update {bad}")
    return QrFactorization(q, r, fact.updates + len(us))


def pinv_apply(a, b, tol: float = DEFAULT_PINV_TOL) -> np.ndarray:
    """``b @ pinv(a)`` with singular values below ``tol * sigma_max`` dropped."""
    a = np.atleast_2d(np.asarray(a, dtype=float))
    b = np.atleast_2d(np.asarray(b, dtype=float))
    if b.shape[1] != a.shape[1]:
        raise DimensionError(f"b has {b.shape[1]} columns, a has {a.shape[1]}")
    u, sv, vh = np.linalg.svd(a, full_matrices=False)
    if sv.size == 0 or sv[0] == 0.0:
        return np.zeros((b.shape[0], a.shape[0]))
    keep = sv > tol * sv[0]
    return ((b @ vh[keep].T) / sv[keep]) @ u[:, keep].T


def truncated_svd(matrix, order: int):
    """Leading ``order`` singular triplets ``(U, sigma, Vh)``.

    Singular values come back non-increasing; ``U`` is ``rows x order``
    and ``Vh`` is ``order x cols``.
    """
    a = np.atleast_2d(np.asarray(matrix, dtype=float))
    if order < 1 or order > min(a.shape):
        raise DimensionError(f"order {order} outside [1, {min(a.shape)}]")
    u, sv, vh = np.linalg.svd(a, full_matrices=False)
    return u[:, :order], sv[:order], vh[:order]


def singular_values(matrix) -> np.ndarray:
    return np.linalg.svd(np.atleast_2d(matrix), compute_uv=False)
