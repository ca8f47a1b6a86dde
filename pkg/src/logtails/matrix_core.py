"""Dense symmetric positive-definite matrix primitives.

Sized for the small covariance matrices (n up to a few dozen) that drive the
tail formulas. All logarithms in the package are natural logarithms.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Sequence

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy.linalg import solve_triangular

from .errors import (
    EmptyIndexSet,
    IndexOutOfRange,
    NotPositiveDefinite,
    NotSymmetric,
    ValidationError,
)

SYMMETRY_RTOL = 1e-12
PIVOT_RTOL = 1e-14


def _frozen(a: ArrayLike) -> NDArray[np.float64]:
    out = np.array(a, dtype=float, copy=True)
    out.setflags(write=False)
    return out


def cholesky(cov: ArrayLike | "CovMatrix") -> NDArray[np.float64]:
    """Lower-triangular Cholesky factor ``L`` with ``L @ L.T == cov``.

    Raises
    ------
    NotSymmetric
        If the matrix is not symmetric to ``1e-12`` relative tolerance.
    NotPositiveDefinite
        If a pivot ``L[i, i]**2`` is at most ``1e-14`` times the largest
        diagonal entry.
    """
    b = cov.entries if isinstance(cov, CovMatrix) else _check_square(cov)
    _check_symmetric(b)
    scale = float(np.max(np.diag(b)))
    if not scale > 0:
        raise NotPositiveDefinite("covariance matrix has no positive diagonal entry")
    try:
        chol = np.linalg.cholesky(b)
    except np.linalg.LinAlgError as exc:
        raise NotPositiveDefinite(f"Cholesky factorization failed: {exc}") from None
    pivots = np.diag(chol) ** 2
    bad = np.flatnonzero(~(pivots > PIVOT_RTOL * scale))
    if bad.size:
        raise NotPositiveDefinite(
            f"pivot {pivots[bad[0]]:.3e} at index {bad[0]} is below "
            f"{PIVOT_RTOL:g} x max diagonal ({scale:.3e})"
        )
    return chol


def _check_square(a: ArrayLike) -> NDArray[np.float64]:
    b = np.asarray(a, dtype=float)
    if b.ndim != 2 or b.shape[0] != b.shape[1] or b.shape[0] == 0:
        raise ValidationError(f"covariance must be a non-empty square matrix, got shape {b.shape}")
    if not np.all(np.isfinite(b)):
        raise ValidationError("covariance matrix has non-finite entries")
    return b


def _check_symmetric(b: NDArray[np.float64]) -> None:
    scale = float(np.max(np.abs(b)))
    asym = float(np.max(np.abs(b - b.T)))
    if asym > SYMMETRY_RTOL * scale:
        raise NotSymmetric(f"covariance matrix asymmetric: max |b_ij - b_ji| = {asym:.3e}")


@dataclass(frozen=True, eq=False)
class CovMatrix:
    """A validated symmetric positive-definite covariance matrix ``B``."""

    entries: NDArray[np.float64]

    def __post_init__(self):
        b = _check_square(self.entries)
        object.__setattr__(self, "entries", _frozen(b))
        # validates symmetry and definiteness, and caches the factor
        self.chol  # noqa: B018

    @classmethod
    def from_sigma_rho(cls, sigma: Sequence[float], rho: float) -> "CovMatrix":
        """Constant-correlation matrix ``b_ij = sigma_i sigma_j rho`` off the diagonal."""
        s = np.asarray(sigma, dtype=float)
        if s.ndim != 1 or s.size == 0 or np.any(~(s > 0)):
            raise ValidationError("sigma must be a non-empty vector of positive numbers")
        corr = np.full((s.size, s.size), float(rho))
        np.fill_diagonal(corr, 1.0)
        return cls(np.outer(s, s) * corr)

    @property
    def n(self) -> int:
        return self.entries.shape[0]

    @cached_property
    def chol(self) -> NDArray[np.float64]:
        return _frozen(cholesky(self.entries))

    @cached_property
    def summary(self) -> "InverseSummary":
        return invert_with_rowsums(self)

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.entries, dtype=dtype)

    def scaled(self, factor: float) -> "CovMatrix":
        return CovMatrix(self.entries * factor)

    def permuted(self, order: Sequence[int]) -> "CovMatrix":
        idx = np.asarray(order, dtype=int)
        return CovMatrix(self.entries[np.ix_(idx, idx)])


def as_cov(cov: ArrayLike | CovMatrix) -> CovMatrix:
    return cov if isinstance(cov, CovMatrix) else CovMatrix(np.asarray(cov, dtype=float))


@dataclass(frozen=True, eq=False)
class InverseSummary:
    """Inverse ``a_ij``, its row sums ``A_k`` and the determinant ``|B|``."""

    inverse: NDArray[np.float64]
    row_sums: NDArray[np.float64]
    determinant: float
    log_determinant: float


def invert_with_rowsums(cov: ArrayLike | CovMatrix) -> InverseSummary:
    c = as_cov(cov)
    chol = c.chol
    n = c.n
    linv = solve_triangular(chol, np.eye(n), lower=True)
    inv = linv.T @ linv
    inv = 0.5 * (inv + inv.T)
    logdet = 2.0 * float(np.sum(np.log(np.diag(chol))))
    return InverseSummary(
        inverse=_frozen(inv),
        row_sums=_frozen(inv.sum(axis=1)),
        determinant=float(np.exp(logdet)),
        log_determinant=logdet,
    )


def principal_submatrix(cov: ArrayLike | CovMatrix, indices: Sequence[int]) -> CovMatrix:
    """Restriction of ``cov`` to the rows and columns in ``indices`` (0-based, increasing)."""
    c = as_cov(cov)
    idx = np.asarray(list(indices), dtype=int)
    if idx.size == 0:
        raise EmptyIndexSet("index set is empty")
    if idx.min() < 0 or idx.max() >= c.n:
        raise IndexOutOfRange(f"indices {idx.tolist()} outside 0..{c.n - 1}")
    if np.any(np.diff(idx) <= 0):
        raise IndexOutOfRange(f"indices {idx.tolist()} are not strictly increasing")
    if idx.size == c.n:
        return c
    return CovMatrix(c.entries[np.ix_(idx, idx)])


@dataclass(frozen=True, eq=False)
class ModelSpec:
    """Gaussian exponent model for ``sum_{k<m} e^{Y_k} - sum_{k>=m} e^{Y_k}``.

    ``Y ~ N(mu, cov)``; the first ``m`` components enter with a plus sign,
    the remaining ``n - m`` with a minus sign.
    """

    mu: NDArray[np.float64]
    cov: CovMatrix
    m: int

    def __post_init__(self):
        object.__setattr__(self, "cov", as_cov(self.cov))
        mu = np.asarray(self.mu, dtype=float)
        if mu.shape != (self.cov.n,):
            raise ValidationError(f"mu has shape {mu.shape}, expected ({self.cov.n},)")
        if not np.all(np.isfinite(mu)):
            raise ValidationError("mu has non-finite entries")
        object.__setattr__(self, "mu", _frozen(mu))
        if not 1 <= int(self.m) <= self.cov.n:
            raise ValidationError(f"m = {self.m} outside 1..{self.cov.n}")
        object.__setattr__(self, "m", int(self.m))

    @classmethod
    def all_positive(cls, mu: ArrayLike, cov: ArrayLike | CovMatrix) -> "ModelSpec":
        c = as_cov(cov)
        return cls(np.asarray(mu, dtype=float), c, c.n)

    @property
    def n(self) -> int:
        return self.cov.n

    @property
    def signs(self) -> NDArray[np.float64]:
        s = np.ones(self.n)
        s[self.m:] = -1.0
        return s

    def with_mu(self, mu: ArrayLike) -> "ModelSpec":
        return ModelSpec(np.asarray(mu, dtype=float), self.cov, self.m)
