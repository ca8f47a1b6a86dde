"""Limiting conditional laws of ``Y`` given a tail event of the sum.

Given ``X <= x`` (left tail) or ``X^{(m)} >= x`` (right tail) the vector
``Y - (1 + lambda_bar) log x`` converges to a degenerate Gaussian. Its
ingredients all come from the support ``I`` of the governing QP solution:

    slope_i = sum_{j in I} Abar_j b_{i j}                 (= 1 on I)
    mean_i  = mu_i - B_{i,I} Bbar^{-1} (log(sum Abar / |Abar|) + mu_I)
    cov'_ij = b_ij - B_{i,I} Bbar^{-1} B_{I,j}            (zero if i or j in I)

and ``log E[exp(u.Y) | tail event] ~ (u.slope) log x + u.mean + u.cov'.u / 2``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numpy.typing import ArrayLike, NDArray

from .errors import DomainError, NonSingletonDominance
from .matrix_core import ModelSpec
from .simplex_qp import QpSolution
from .tail_asymptotics import _left_solution, right_tail_mixed


@dataclass(frozen=True, eq=False)
class LimitingGaussian:
    """Limit of the conditional law of ``Y - (1 + lambda_bar) log x``.

    ``slope = 1 + lambda_bar`` is the exponent of ``x`` in the conditional
    moment ``E[e^{Y_i} | ...]``. ``driving`` lists the support indices.
    """

    lambda_bar: NDArray[np.float64]
    mu_prime: NDArray[np.float64]
    cov_prime: NDArray[np.float64]
    driving: tuple[int, ...]
    tail: str
    split: int | None = None

    @property
    def slope(self) -> NDArray[np.float64]:
        return 1.0 + self.lambda_bar

    def log_laplace(self, u: ArrayLike, x: float) -> float:
        """Leading term of ``log E[exp(u.Y) | tail event at x]``."""
        u = np.asarray(u, dtype=float)
        if u.shape != self.mu_prime.shape:
            raise DomainError(f"u has shape {u.shape}, expected {self.mu_prime.shape}")
        return float(
            (u @ self.slope) * math.log(x) + u @ self.mu_prime + 0.5 * u @ self.cov_prime @ u
        )


def _limit_from_solution(model: ModelSpec, sol: QpSolution, tail: str, split=None):
    b = model.cov.entries
    idx = list(sol.active_set)
    rows = np.asarray(sol.reduced_rowsums)
    terms = np.log(rows.sum() / np.abs(rows)) + model.mu[idx]
    cross = b[:, idx]  # B_{., I}
    slope = cross @ rows
    mean = model.mu - cross @ (sol.reduced_inverse @ terms)
    cov_prime = b - cross @ sol.reduced_inverse @ cross.T
    cov_prime[idx, :] = 0.0
    cov_prime[:, idx] = 0.0
    cov_prime = 0.5 * (cov_prime + cov_prime.T)
    lam = slope - 1.0
    for a in (lam, mean, cov_prime):
        a.setflags(write=False)
    return LimitingGaussian(lam, mean, cov_prime, tuple(idx), tail, split)


def limiting_gaussian_left(model: ModelSpec) -> LimitingGaussian:
    """Limit law of ``Y`` given ``X <= x`` (equivalently ``X = x``) as ``x -> 0``."""
    return _limit_from_solution(model, _left_solution(model), "left")


def limiting_gaussian_right(model: ModelSpec) -> LimitingGaussian:
    """Same objects for ``X^{(m)} >= x`` as ``x -> infinity``.

    Requires a unique dominant split; with several the conditional law is
    not characterized and :class:`NonSingletonDominance` is raised.
    """
    sel = right_tail_mixed(model)
    if len(sel.p4) != 1:
        raise NonSingletonDominance(
            f"dominant splits {list(sel.p4)} are tied; conditional law needs a single one"
        )
    p = sel.p4[0]
    return _limit_from_solution(model, sel.per_split[p].reduced, "right", split=p)


def conditional_laplace_left(model: ModelSpec, u: ArrayLike, x: float) -> float:
    """Log of the leading term of ``E[exp(u.Y) | X <= x]`` as ``x -> 0``."""
    return limiting_gaussian_left(model).log_laplace(u, x)


def conditional_laplace_right(model: ModelSpec, u: ArrayLike, x: float) -> float:
    """Log of the leading term of ``E[exp(u.Y) | X^{(m)} >= x]`` as ``x -> infinity``."""
    return limiting_gaussian_right(model).log_laplace(u, x)
