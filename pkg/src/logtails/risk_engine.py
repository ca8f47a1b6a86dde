"""Stress testing in the multidimensional Black-Scholes model.

A portfolio ``X_t = sum_i xi_i S^i_t`` with

    log S_t = log S_0 + theta t - diag(B) t / 2 + B^{1/2} W_t

is a signed sum of log-normals with ``mu_i = log S_0^i + log|xi_i| +
theta_i t - b_ii t / 2`` and covariance ``t B``. Conditional expectations of
single assets given ``X_t = x`` then follow from the limiting conditional
laws of the Gaussian exponents.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy.optimize import brentq

from .conditional_laws import limiting_gaussian_left, limiting_gaussian_right
from .errors import DomainError, ValidationError, ZeroWeight
from .matrix_core import CovMatrix, ModelSpec, as_cov
from .simplex_qp import solve
from .tail_asymptotics import left_tail_cdf_asymptote, right_tail_cdf_asymptote

SAFE = "Safe"
DANGEROUS = "Dangerous"
PROPORTIONAL = "ProportionalToX"
SLOWER = "SlowerThanX"


@dataclass(frozen=True, eq=False)
class MarketModel:
    """Initial prices, drifts, per-unit-time covariance and default horizon."""

    s0: NDArray[np.float64]
    theta: NDArray[np.float64]
    cov: CovMatrix
    horizon: float = 1.0

    def __post_init__(self):
        cov = as_cov(self.cov)
        object.__setattr__(self, "cov", cov)
        s0 = np.asarray(self.s0, dtype=float)
        theta = np.asarray(self.theta, dtype=float)
        if s0.shape != (cov.n,) or theta.shape != (cov.n,):
            raise ValidationError("s0 and theta must match the covariance dimension")
        if np.any(~(s0 > 0)):
            raise ValidationError("initial prices must be positive")
        if not self.horizon > 0:
            raise ValidationError("horizon must be positive")
        object.__setattr__(self, "s0", s0)
        object.__setattr__(self, "theta", theta)

    @property
    def n(self) -> int:
        return self.cov.n


@dataclass(frozen=True, eq=False)
class MappedModel:
    """Gaussian model of a portfolio with positives first.

    ``order[k]`` is the original asset index of model component ``k``.
    """

    model: ModelSpec
    order: NDArray[np.int64]
    weights: NDArray[np.float64]

    def to_original(self, values: ArrayLike) -> NDArray:
        v = np.asarray(values)
        out = np.empty_like(v)
        out[self.order] = v
        return out


def to_model(market: MarketModel, weights: ArrayLike, t: float | None = None) -> MappedModel:
    """Map a Black-Scholes portfolio to a :class:`ModelSpec`.

    Positive weights are moved in front (stable order); the permutation is
    kept so results can be reported in the caller's asset order.
    """
    t = market.horizon if t is None else float(t)
    if not t > 0:
        raise ValidationError("horizon must be positive")
    xi = np.asarray(weights, dtype=float)
    if xi.shape != (market.n,):
        raise ValidationError(f"weights have shape {xi.shape}, expected ({market.n},)")
    if np.any(xi == 0):
        raise ZeroWeight(f"zero weight at assets {np.flatnonzero(xi == 0).tolist()}")
    order = np.concatenate([np.flatnonzero(xi > 0), np.flatnonzero(xi < 0)])
    b = market.cov.entries
    mu = np.log(market.s0) + np.log(np.abs(xi)) + market.theta * t - 0.5 * np.diag(b) * t
    cov = CovMatrix(t * b[np.ix_(order, order)])
    model = ModelSpec(mu[order], cov, int(np.count_nonzero(xi > 0)))
    return MappedModel(model, order, xi)


@dataclass(frozen=True, eq=False)
class StressReport:
    """Per-asset conditional expectations ``e_i(t, x)``, original asset order.

    ``exponent[i]`` is the power of ``x`` in the leading term of ``e_i``;
    ``classes[i]`` is Safe/Dangerous (index crash) or
    ProportionalToX/SlowerThanX (spread scenario).
    """

    x: float
    t: float
    expectations: NDArray[np.float64]
    log_expectations: NDArray[np.float64]
    exponent: NDArray[np.float64]
    classes: tuple[str, ...]
    driving: tuple[int, ...]
    tail: str
    split: int | None = None
    weights: NDArray[np.float64] = field(default=None, repr=False)


def _report(mapped: MappedModel, limit, x, t, labels) -> StressReport:
    n = mapped.model.n
    log_e = np.array(
        [limit.log_laplace(np.eye(n)[k], x) for k in range(n)]
    ) - np.log(np.abs(mapped.weights[mapped.order]))
    driving_model = set(limit.driving)
    cls_model = [labels[0] if k in driving_model else labels[1] for k in range(n)]
    driving = tuple(sorted(int(mapped.order[k]) for k in driving_model))
    classes = tuple(mapped.to_original(np.array(cls_model, dtype=object)).tolist())
    log_e = mapped.to_original(log_e)
    return StressReport(
        x=float(x),
        t=float(t),
        expectations=np.exp(log_e),
        log_expectations=log_e,
        exponent=mapped.to_original(limit.slope),
        classes=classes,
        driving=driving,
        tail=limit.tail,
        split=None if limit.split is None else int(mapped.order[limit.split]),
        weights=mapped.weights,
    )


def stress_index_crash(
    market: MarketModel, benchmark: ArrayLike, x: float, t: float | None = None
) -> StressReport:
    """Conditional asset expectations given a positive-weight index falls to ``x``.

    Safe assets (the support of the minimum-variance weights of ``t B``) have
    ``e_i ~ x wbar_i / xi_i``; the others decay like ``x`` to a power above 1.
    """
    xi = np.asarray(benchmark, dtype=float)
    if np.any(~(xi > 0)):
        raise DomainError("index-crash benchmark needs strictly positive weights")
    t = market.horizon if t is None else float(t)
    mapped = to_model(market, xi, t)
    return _report(mapped, limiting_gaussian_left(mapped.model), x, t, (SAFE, DANGEROUS))


def stress_spread(
    market: MarketModel, benchmark: ArrayLike, x: float, t: float | None = None
) -> StressReport:
    """Conditional asset expectations given a long-short benchmark rises to ``x``.

    Exactly one long asset, the dominant split, grows in proportion to ``x``,
    together with the short assets on that split's support.
    """
    xi = np.asarray(benchmark, dtype=float)
    if not (np.any(xi > 0) and np.all(xi != 0)):
        raise DomainError("spread benchmark needs nonzero weights with at least one positive")
    t = market.horizon if t is None else float(t)
    mapped = to_model(market, xi, t)
    return _report(mapped, limiting_gaussian_right(mapped.model), x, t, (PROPORTIONAL, SLOWER))


def stress_report(market: MarketModel, benchmark: ArrayLike, x: float, t: float | None = None):
    """Dispatch on the sign pattern of ``benchmark``."""
    xi = np.asarray(benchmark, dtype=float)
    if np.all(xi > 0):
        return stress_index_crash(market, xi, x, t)
    return stress_spread(market, xi, x, t)


def portfolio_conditional_value(
    market: MarketModel,
    held: ArrayLike,
    benchmark: ArrayLike,
    x: float,
    t: float | None = None,
) -> float:
    """Leading term of ``E[V_t | X_t = x] = sum_i v_i e_i(t, x)``."""
    v = np.asarray(held, dtype=float)
    if v.shape != (market.n,):
        raise ValidationError(f"held weights have shape {v.shape}, expected ({market.n},)")
    if not np.any(v):
        return 0.0
    rep = stress_report(market, benchmark, x, t)
    return float(math.fsum(v * rep.expectations))


def index_benchmark(market: MarketModel, caps: ArrayLike) -> NDArray[np.float64]:
    """Weights of a market index normalized to initial value 1."""
    c = np.asarray(caps, dtype=float)
    if np.any(~(c > 0)):
        raise DomainError("market capitalizations must be positive")
    return c / float(c @ market.s0)


def relative_performance_benchmark(
    market: MarketModel, weights_a: ArrayLike, weights_b: ArrayLike
) -> NDArray[np.float64]:
    """Weights of ``X^a_t / X^a_0 - X^b_t / X^b_0``.

    With disjoint supports this is the two-area spread; with overlapping
    supports it compares two benchmarks built on the same stocks.
    """
    a = np.asarray(weights_a, dtype=float)
    b = np.asarray(weights_b, dtype=float)
    xa, xb = float(a @ market.s0), float(b @ market.s0)
    if not (xa > 0 and xb > 0):
        raise DomainError("both benchmarks need a positive initial value")
    return a / xa - b / xb


def loss_quantile(
    market: MarketModel, weights: ArrayLike, alpha: float, t: float | None = None
) -> float:
    """Approximate level ``x`` with tail probability ``alpha``.

    Inverts the leading-term tail formula (left tail for positive weights,
    right tail for long-short), so it inherits the formula's slow
    logarithmic convergence; treat the result as an order-of-magnitude value.
    """
    if not 0 < alpha < 1:
        raise DomainError("alpha must lie in (0, 1)")
    mapped = to_model(market, weights, t)
    model = mapped.model
    target = math.log(alpha)
    if model.m == model.n:
        asym = left_tail_cdf_asymptote(model)
        f = lambda lx: asym.log_value(math.exp(lx)) - target  # noqa: E731
        lo, hi = -1.0, -1.0
        while f(lo) > 0:
            lo *= 2.0
        hi = lo / 2.0 if lo < -1.0 else -1.0
        if f(hi) < 0:
            raise DomainError(f"alpha={alpha} is outside the left-tail regime of the formula")
        return math.exp(brentq(f, lo, hi, xtol=1e-12))
    asym = right_tail_cdf_asymptote(model)
    g = lambda lx: asym.log_value(math.exp(lx)) - target  # noqa: E731
    lo = hi = 1.0
    while g(hi) > 0:
        hi *= 2.0
    lo = hi / 2.0 if hi > 1.0 else 1.0
    if g(lo) < 0:
        raise DomainError(f"alpha={alpha} is outside the right-tail regime of the formula")
    return math.exp(brentq(g, lo, hi, xtol=1e-12))


def stress_index_crash_explicit(
    market: MarketModel, benchmark: ArrayLike, x: float, t: float | None = None
) -> NDArray[np.float64]:
    """``e_i(t, x)`` from the explicit index-crash formulas written in ``B``, ``S_0``, ``theta``.

    Independent of :func:`stress_index_crash`, which goes through the
    generic conditional Laplace transform of the Gaussian exponents; the two
    must agree. Assets are in original order.
    """
    t = market.horizon if t is None else float(t)
    xi = np.asarray(benchmark, dtype=float)
    if xi.shape != (market.n,) or np.any(~(xi > 0)):
        raise DomainError("index-crash benchmark needs strictly positive weights")
    b = market.cov.entries
    sol = solve(CovMatrix(b))
    idx = list(sol.active_set)
    bbar_inv = np.linalg.inv(b[np.ix_(idx, idx)])
    rows = bbar_inv.sum(axis=1)
    total = rows.sum()
    mu_t = np.log(market.s0) + np.log(xi) + market.theta * t - 0.5 * np.diag(b) * t
    terms = np.log(total / rows) + mu_t[idx]
    out = np.empty(market.n)
    for i in range(market.n):
        if i in idx:
            out[i] = x * sol.wbar[i] / xi[i]
            continue
        bi = b[idx, i]
        expo = float(rows @ bi)
        out[i] = (
            x**expo
            * market.s0[i]
            * math.exp(market.theta[i] * t - bi @ bbar_inv @ terms)
            * math.exp(-0.5 * t * bi @ bbar_inv @ bi)
        )
    return out
