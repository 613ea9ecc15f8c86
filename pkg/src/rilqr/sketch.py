"""Gaussian compression of the data stack and its streaming update."""
from __future__ import annotations

import copy
from dataclasses import dataclass, field

import numpy as np

from rilqr.errors import DimensionError, NonFiniteError
from rilqr.hankel import HankelStack
from rilqr.linalg import QrFactorization, qr_decompose, rank1_qr_update
from rilqr.streams import as_generator


@dataclass(frozen=True)
class SketchConfig:
    """Compression settings.

    Attributes
    ----------
    oversampling : int
        Extra sketch columns ``l``; the sketch width is ``s + l``.
    seed : int or None
        Seed for the historical sketch when no generator is supplied.
    gamma : float
        Weight of the online update columns.
    """

    oversampling: int = 10
    seed: int | None = 0
    gamma: float = 1.0

    def __post_init__(self):
        if self.oversampling < 1:
            raise ValueError(f"oversampling must be positive, got {self.oversampling}")
        if not self.gamma > 0:
            raise ValueError(f"gamma must be positive, got {self.gamma}")

    def width(self, s: int) -> int:
        return s + self.oversampling


def draw_sketch(rows: int, cols: int, seed=None) -> np.ndarray:
    """``rows x cols`` matrix with iid ``N(0, 1/cols)`` entries."""
    if rows < 1 or cols < 1:
        raise DimensionError(f"sketch shape must be positive, got {rows} x {cols}")
    rng = as_generator(seed)
    return rng.standard_normal((rows, cols)) / np.sqrt(cols)


@dataclass
class CompressedStack:
    """Sketched stack ``Hbar = H @ C`` held as a QR factorization of ``Hbar.T``.

    ``rng`` draws the per-step sketch rows; ``step`` is the index of the
    last applied online update (-1 before any).
    """

    factorization: QrFactorization
    k: int
    m: int
    n: int
    rng: np.random.Generator = field(repr=False)
    step: int = -1

    @property
    def nc(self) -> int:
        return self.factorization.nc

    @property
    def s(self) -> int:
        return self.factorization.s

    @property
    def wp_rows(self) -> slice:
        km = self.k * self.m
        return slice(km, km + self.k * (self.m + self.n))

    @property
    def matrix(self) -> np.ndarray:
        """Reconstructed ``Hbar`` (``s x nc``)."""
        return self.factorization.matrix().T

    @property
    def wp_bar(self) -> np.ndarray:
        """Compressed past-data rows ``[Up; Yp] @ C``."""
        f = self.factorization
        return (f.q @ f.r[:, self.wp_rows]).T

    def copy(self) -> "CompressedStack":
        return CompressedStack(self.factorization.copy(), self.k, self.m, self.n,
                               copy.deepcopy(self.rng), self.step)


def compress_initial(stack: HankelStack, cfg: SketchConfig = SketchConfig(), *, sketch=None,
                     rng=None, online_rng=None) -> CompressedStack:
    """Compress ``H`` and factor the transpose of the result.

    Parameters
    ----------
    stack : HankelStack
    cfg : SketchConfig
    sketch : ndarray, optional
        Explicit ``N x nc`` compression matrix; drawn from ``rng`` when omitted.
    rng : Generator or int, optional
        Source of the historical sketch (defaults to ``cfg.seed``).
    online_rng : Generator or int, optional
        Source of the online sketch rows (defaults to a stream derived from ``rng``).
    """
    s = stack.s
    nc = cfg.width(s)
    gen = as_generator(cfg.seed if rng is None else rng)
    if sketch is None:
        sketch = draw_sketch(stack.N, nc, gen)
    else:
        sketch = np.asarray(sketch, dtype=float)
        if sketch.shape[0] != stack.N or sketch.shape[1] < s:
            raise DimensionError(f"sketch must be {stack.N} x (>= {s}), got {sketch.shape}")
    online_rng = gen.spawn(1)[0] if online_rng is None else as_generator(online_rng)
    hbar = stack.matrix @ sketch
    return CompressedStack(qr_decompose(hbar.T), stack.k, stack.m, stack.n, online_rng)


def streaming_update(cstack: CompressedStack, h, gamma: float = 1.0, *, c=None) -> CompressedStack:
    """Fold ``gamma * outer(h, c_t)`` into the compressed stack.

    ``c_t`` has iid ``N(0, 1/nc)`` entries drawn from ``cstack.rng``
    unless given explicitly. The input is left untouched except for the
    advance of its generator.
    """
    h = np.asarray(h, dtype=float)
    if h.shape != (cstack.s,):
        raise DimensionError(f"update column must have shape ({cstack.s},), got {h.shape}")
    if not np.all(np.isfinite(h)):
        raise NonFiniteError("update column has non-finite entries")
    if c is None:
        c = cstack.rng.standard_normal(cstack.nc) / np.sqrt(cstack.nc)
    else:
        c = np.asarray(c, dtype=float)
        if c.shape != (cstack.nc,):
            raise DimensionError(f"sketch row must have shape ({cstack.nc},), got {c.shape}")
    fact = rank1_qr_update(cstack.factorization, gamma * c, h)
    return CompressedStack(fact, cstack.k, cstack.m, cstack.n, cstack.rng, cstack.step + 1)
