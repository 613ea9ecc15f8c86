"""Predictor extraction from the stack's triangular factor and receding-horizon gains."""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from rilqr.errors import (DimensionError, ExcitationError, ModelMismatchWarning,
                          NumericalError)
from rilqr.linalg import DEFAULT_PINV_TOL, QrFactorization, pinv_apply

R11_COND_LIMIT = 1e12
TRAILING_BLOCK_RATIO = 0.1
ORDER_GAP_RATIO = 10.0


@dataclass
class RBlocks:
    """Lower-triangular factor ``L`` of ``[Uf; Wp; Yf]`` split by row group.

    ``r33`` is not used by the estimator and is kept only so that the
    partition can be inverted.
    """

    r11: np.ndarray
    r21: np.ndarray
    r22: np.ndarray
    r31: np.ndarray
    r32: np.ndarray
    k: int
    m: int
    n: int
    r33: np.ndarray | None = None

    def assemble(self) -> np.ndarray:
        """Re-stack the blocks into ``L`` (zeros above the block diagonal)."""
        km, kw, kn = self.r11.shape[0], self.r22.shape[0], self.r31.shape[0]
        out = np.zeros((km + kw + kn, km + kw + kn))
        out[:km, :km] = self.r11
        out[km:km + kw, :km] = self.r21
        out[km:km + kw, km:km + kw] = self.r22
        out[km + kw:, :km] = self.r31
        out[km + kw:, km:km + kw] = self.r32
        if self.r33 is not None:
            out[km + kw:, km + kw:] = self.r33
        return out


def extract_rblocks(fact: QrFactorization, k: int, m: int, n: int) -> RBlocks:
    """Partition ``L = r[:s, :s].T`` into the Uf / Wp / Yf groups."""
    s = 2 * k * (m + n)
    if fact.s != s:
        raise DimensionError(f"factorization has {fact.s} columns, expected 2k(m+n) = {s}")
    L = fact.r[:s, :s].T
    km, kw = k * m, k * (m + n)
    wp = slice(km, km + kw)
    yf = slice(km + kw, s)
    return RBlocks(L[:km, :km].copy(), L[wp, :km].copy(), L[wp, wp].copy(),
                   L[yf, :km].copy(), L[yf, wp].copy(), k, m, n, L[yf, yf].copy())


def oblique_projection(blocks: RBlocks, wp_bar, tol: float = DEFAULT_PINV_TOL):
    """Project the future outputs onto the past data along the future inputs.

    Returns
    -------
    zeta : ndarray, shape (kn, cols of wp_bar)
    lp_bar : ndarray, shape (kn, k(m+n))
        ``r32 @ pinv(r22)``.

    Raises
    ------
    ExcitationError
        If ``r22`` has numerical rank below the state dimension.
    """
    r22 = blocks.r22
    sv = np.linalg.svd(r22, compute_uv=False)
    rank = int(np.sum(sv > tol * sv[0])) if sv.size and sv[0] > 0 else 0
    if rank < blocks.n:
        raise ExcitationError(f"past-data block has rank {rank} < state dimension {blocks.n}")
    lp_bar = pinv_apply(r22, blocks.r32, tol)
    return lp_bar @ np.asarray(wp_bar, dtype=float), lp_bar


@dataclass
class SubspaceEstimate:
    """Data-driven predictors.

    ``sx`` is known only up to a right similarity; ``state_map`` is
    ``sx @ inv(t_matrix)``, which has the identity as its top block.
    """

    sx: np.ndarray
    su: np.ndarray
    t_matrix: np.ndarray
    lp_bar: np.ndarray
    singular_values: np.ndarray
    trailing_norm: float = 0.0
    diagnostics: dict = field(default_factory=dict)

    @property
    def n(self) -> int:
        return self.sx.shape[1]

    @property
    def state_map(self) -> np.ndarray:
        return np.linalg.solve(self.t_matrix.T, self.sx.T).T


def extract_predictors(blocks: RBlocks, zeta, order: int | None = None, *,
                       lp_bar=None, tol: float = DEFAULT_PINV_TOL) -> SubspaceEstimate:
    """Recover ``S^x`` (up to similarity) and ``S^u`` from the projected data.

    Parameters
    ----------
    blocks : RBlocks
    zeta : ndarray
        Oblique projection of the future outputs.
    order : int, optional
        State dimension; defaults to the output dimension.
    lp_bar : ndarray, optional
        ``r32 @ pinv(r22)`` if already available.

    Raises
    ------
    ExcitationError
        If ``r11`` is too ill-conditioned to invert.
    NumericalError
        If the top block of ``S^x`` is singular.
    """
    n = blocks.n if order is None else order
    k, m = blocks.k, blocks.m
    kp = k - 1
    zeta = np.asarray(zeta, dtype=float)
    if n < 1 or n > min(zeta.shape):
        raise DimensionError(f"order {n} outside [1, {min(zeta.shape)}]")
    u_all, sv_all, _ = np.linalg.svd(zeta, full_matrices=False)
    sx = u_all[:, :n] * np.sqrt(sv_all[:n])

    r11 = blocks.r11
    cond = np.linalg.cond(r11)
    if not np.isfinite(cond) or cond > R11_COND_LIMIT:
        raise ExcitationError(f"future-input block is ill-conditioned (cond = {cond:.3e})")
    if lp_bar is None:
        lp_bar = pinv_apply(blocks.r22, blocks.r32, tol)
    rhs = blocks.r31 - lp_bar @ blocks.r21
    # rhs @ inv(r11) with r11 lower triangular
    full = sla.solve_triangular(r11, rhs.T, trans="T", lower=True).T
    su = full[:, :kp * m]
    trailing = float(np.linalg.norm(full[:, kp * m:]))
    su_norm = float(np.linalg.norm(su))
    if trailing > TRAILING_BLOCK_RATIO * su_norm:
        warnings.warn(f"trailing input block norm {trailing:.3e} exceeds "
                      f"{TRAILING_BLOCK_RATIO} x predictor norm {su_norm:.3e}",
                      ModelMismatchWarning, stacklevel=2)

    t_matrix = sx[:n].copy()
    t_cond = np.linalg.cond(t_matrix)
    if not np.isfinite(t_cond) or t_cond > 1e14:
        raise NumericalError(f"similarity block is singular (cond = {t_cond:.3e})")
    gap = sv_all[n - 1] / sv_all[n] if sv_all.size > n and sv_all[n] > 0 else np.inf
    if gap < ORDER_GAP_RATIO:
        warnings.warn(f"weak order gap: sigma_n / sigma_(n+1) = {gap:.3g}", ModelMismatchWarning,
                      stacklevel=2)
    diag = {"order_gap": float(gap), "t_condition": float(t_cond), "r11_condition": float(cond)}
    return SubspaceEstimate(sx, su, t_matrix, lp_bar, sv_all, trailing, diag)


def estimate_from_factorization(fact: QrFactorization, wp_bar, k: int, m: int, n: int,
                                tol: float = DEFAULT_PINV_TOL) -> SubspaceEstimate:
    """Blocks, projection and predictors in one call."""
    blocks = extract_rblocks(fact, k, m, n)
    zeta, lp_bar = oblique_projection(blocks, wp_bar, tol)
    return extract_predictors(blocks, zeta, n, lp_bar=lp_bar, tol=tol)


def _psd_check(name, mat, strict):
    if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
        raise DimensionError(f"{name} must be square, got {mat.shape}")
    if not np.allclose(mat, mat.T, atol=1e-12):
        raise ValueError(f"{name} must be symmetric")
    low = np.linalg.eigvalsh(mat).min()
    if (strict and low <= 0) or low < -1e-12:
        raise ValueError(f"{name} must be positive {'definite' if strict else 'semidefinite'}, "
                         f"smallest eigenvalue {low:.3e}")


@dataclass
class LqrWeights:
    """Stage weights ``q``, ``r``, terminal weight ``p`` and horizon ``kp``."""

    q: np.ndarray
    p: np.ndarray
    r: np.ndarray
    kp: int

    def __post_init__(self):
        self.q = np.atleast_2d(np.asarray(self.q, dtype=float))
        self.p = np.atleast_2d(np.asarray(self.p, dtype=float))
        self.r = np.atleast_2d(np.asarray(self.r, dtype=float))
        if self.kp < 1:
            raise ValueError(f"horizon must be >= 1, got {self.kp}")
        _psd_check("q", self.q, False)
        _psd_check("p", self.p, False)
        _psd_check("r", self.r, True)
        if self.q.shape != self.p.shape:
            raise DimensionError(f"q {self.q.shape} and p {self.p.shape} differ")

    @property
    def qbar(self) -> np.ndarray:
        return sla.block_diag(*([self.q] * self.kp + [self.p]))

    @property
    def rbar(self) -> np.ndarray:
        return sla.block_diag(*([self.r] * self.kp))


@dataclass
class GainMatrix:
    """Stacked horizon gain: ``U = -kgain @ x``."""

    kgain: np.ndarray
    m: int

    def __post_init__(self):
        if self.kgain.shape[0] % self.m:
            raise DimensionError(f"{self.kgain.shape[0]} gain rows do not split into blocks of {self.m}")

    @property
    def first_block(self) -> np.ndarray:
        return self.kgain[:self.m]

    @property
    def horizon(self) -> int:
        return self.kgain.shape[0] // self.m

    def block(self, j: int) -> np.ndarray:
        return self.kgain[j * self.m:(j + 1) * self.m]


def lqr_gain(predictors, w: LqrWeights) -> GainMatrix:
    """Finite-horizon gain from state and input predictors.

    Parameters
    ----------
    predictors : SubspaceEstimate or tuple
        Either an estimate (its ``state_map`` is used) or a
        ``(S^x, S^u)`` pair such as returned by :func:`batch_predictors`.
    w : LqrWeights

    Raises
    ------
    NumericalError
        If ``S^u.T Qbar S^u + Rbar`` is not positive definite.
    """
    if isinstance(predictors, SubspaceEstimate):
        sx, su = predictors.state_map, predictors.su
    else:
        sx, su = (np.atleast_2d(np.asarray(p, dtype=float)) for p in predictors)
    qbar, rbar = w.qbar, w.rbar
    if sx.shape[0] != qbar.shape[0] or su.shape[0] != qbar.shape[0] or su.shape[1] != rbar.shape[0]:
        raise DimensionError(f"predictor shapes {sx.shape}, {su.shape} do not match weights "
                             f"{qbar.shape}, {rbar.shape}")
    qsu = qbar @ su
    normal = su.T @ qsu + rbar
    normal = 0.5 * (normal + normal.T)
    try:
        cf = sla.cho_factor(normal, lower=True)
    except np.linalg.LinAlgError:
        low = np.linalg.eigvalsh(normal).min()
        raise NumericalError(f"normal matrix not positive definite (smallest eigenvalue {low:.3e})") from None
    kgain = sla.cho_solve(cf, qsu.T @ sx)
    return GainMatrix(kgain, w.r.shape[0])


def batch_predictors(a, b, kp: int):
    """Stacked predictors mapping ``x(0)`` and ``u(0..kp-1)`` to ``x(0..kp)``.

    Returns
    -------
    sx : ndarray, shape (n (kp+1), n)
        ``[I; A; ...; A^kp]``.
    su : ndarray, shape (n (kp+1), m kp)
        Block ``(i, j)`` is ``A^(i-1-j) B`` for ``j < i``, zero otherwise.
    """
    a = np.atleast_2d(np.asarray(a, dtype=float))
    b = np.asarray(b, dtype=float).reshape(a.shape[0], -1)
    n, m = b.shape
    sx = np.empty((n * (kp + 1), n))
    sx[:n] = np.eye(n)
    for i in range(1, kp + 1):
        sx[i * n:(i + 1) * n] = a @ sx[(i - 1) * n:i * n]
    su = np.zeros((n * (kp + 1), m * kp))
    for j in range(kp):
        col = b
        for i in range(j + 1, kp + 1):
            su[i * n:(i + 1) * n, j * m:(j + 1) * m] = col
            col = a @ col
    return sx, su
