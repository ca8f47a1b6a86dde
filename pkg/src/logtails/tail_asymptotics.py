"""Leading-term tail formulas for sums and differences of log-normals.

Every formula is carried as a quadruple ``(delta1, delta2, delta3, delta4)``
and evaluated in log-space as

    log delta1 + delta2 log L + delta3 log x - L^2 / (2 delta4),  L = |log x|,

so probabilities far below the double-precision range stay representable.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, replace

import numpy as np
from numpy.typing import ArrayLike, NDArray

from .errors import AssumptionViolated, DomainError
from .matrix_core import ModelSpec
from .simplex_qp import FeasibleRegion, QpSolution, require_assumption, solve

TIE_RTOL = 1e-9
ERROR_ORDER_LOG = "1/log"
ERROR_ORDER_SQRT_LOG = "1/sqrt(log)"


class OutsideAsymptoticRegime(UserWarning):
    """Evaluation point with ``|log x| < 1``."""


@dataclass(frozen=True)
class TailValue:
    log_value: float
    value: float
    in_regime: bool


@dataclass(frozen=True, eq=False)
class TailAsymptote:
    """Leading term ``delta1 L^delta2 x^delta3 exp(-L^2 / (2 delta4))``.

    ``tail`` is ``"left"`` (x -> 0) or ``"right"`` (x -> infinity) and
    ``kind`` is ``"cdf"`` (``P[X <= x]`` resp. ``P[X >= x]``) or
    ``"density"``. ``error_order`` records the relative error class of the
    leading term.
    """

    delta1: float
    delta2: float
    delta3: float
    delta4: float
    constant_C: float
    tail: str
    kind: str
    reduced: QpSolution | None = None
    error_order: str = ERROR_ORDER_LOG

    def __post_init__(self):
        if not (self.delta1 > 0 and self.delta4 > 0):
            raise DomainError(f"invalid asymptote: delta1={self.delta1}, delta4={self.delta4}")

    def in_regime(self, x: ArrayLike) -> NDArray[np.bool_] | bool:
        lx = np.log(np.asarray(x, dtype=float))
        ok = -lx >= 1.0 if self.tail == "left" else lx >= 1.0
        return bool(ok) if np.ndim(ok) == 0 else ok

    def log_value(self, x: ArrayLike):
        lx = np.log(np.asarray(x, dtype=float))
        big_l = np.abs(lx)
        with np.errstate(divide="ignore"):
            out = (
                math.log(self.delta1)
                + self.delta2 * np.log(big_l)
                + self.delta3 * lx
                - big_l**2 / (2.0 * self.delta4)
            )
        return float(out) if np.ndim(out) == 0 else out

    def value(self, x: ArrayLike):
        return np.exp(self.log_value(x)) if np.ndim(x) else math.exp(self.log_value(x))

    def evaluate(self, x: float) -> TailValue:
        """Log-value, value (0.0 on underflow) and the regime flag at ``x``."""
        inside = self.in_regime(x)
        if not inside:
            warnings.warn(
                f"x = {x:g} is outside the asymptotic regime (|log x| < 1)",
                OutsideAsymptoticRegime,
                stacklevel=2,
            )
        lv = self.log_value(x)
        return TailValue(lv, math.exp(lv) if lv > -745.0 else 0.0, inside)


@dataclass(frozen=True, eq=False)
class DominanceSelection:
    """Dominant splits of a mixed-sign sum and the merged asymptote."""

    p4: tuple[int, ...]
    p3: tuple[int, ...]
    p2: tuple[int, ...]
    merged: TailAsymptote
    per_split: dict[int, TailAsymptote] = field(default_factory=dict)


def _log_terms(mu_bar: NDArray, rows: NDArray) -> NDArray:
    # log(sum A / |A_k|) + mu_k on the support
    return np.log(rows.sum() / np.abs(rows)) + mu_bar


def _reduced_parameters(mu: NDArray, sol: QpSolution):
    """Constant C, power and rate of the reduced Laplace-method formula."""
    rows = np.asarray(sol.reduced_rowsums)
    total = float(rows.sum())
    idx = list(sol.active_set)
    terms = _log_terms(np.asarray(mu)[idx], rows)
    quad = float(terms @ sol.reduced_inverse @ terms)
    log_c = (
        -0.5 * quad
        - 0.5 * math.log(2.0 * math.pi)
        - 0.5 * sol.reduced_log_det
        + 0.5 * math.log(total)
        - 0.5 * float(np.sum(np.log(np.abs(rows))))
    )
    power = float(rows @ terms)
    return log_c, power, total


def _cdf_asymptote(mu, sol: QpSolution, tail: str) -> TailAsymptote:
    log_c, power, total = _reduced_parameters(mu, sol)
    return TailAsymptote(
        delta1=math.exp(log_c) / total,
        delta2=-(1.0 + sol.nbar) / 2.0,
        delta3=power,
        delta4=1.0 / total,
        constant_C=math.exp(log_c),
        tail=tail,
        kind="cdf",
        reduced=sol,
    )


def _density_from_cdf_left(cdf: TailAsymptote) -> TailAsymptote:
    total = 1.0 / cdf.delta4
    return replace(
        cdf,
        delta1=cdf.delta1 * total,
        delta2=cdf.delta2 + 1.0,
        delta3=cdf.delta3 - 1.0,
        kind="density",
    )


def _left_solution(model: ModelSpec) -> QpSolution:
    if model.m != model.n:
        raise DomainError(f"left tail needs an all-positive sum, got m={model.m} of n={model.n}")
    sol = solve(model.cov, FeasibleRegion.sum_simplex(model.n))
    require_assumption(sol)
    return sol


def left_tail_cdf_asymptote(model: ModelSpec) -> TailAsymptote:
    """Leading term of ``P[X <= x]`` as ``x -> 0`` for ``X = sum e^{Y_i}``.

    Only the support of the minimum-variance weights enters: with ``Abar``
    the row sums of the inverse of the covariance restricted to the support,
    ``delta4 = 1 / sum(Abar)``, ``delta2 = -(1 + nbar) / 2`` and
    ``delta3 = sum_k Abar_k (log(sum Abar / Abar_k) + mu_k)``.
    """
    return _cdf_asymptote(model.mu, _left_solution(model), "left")


def left_tail_density_asymptote(model: ModelSpec) -> TailAsymptote:
    """Leading term of the density of ``X`` as ``x -> 0``; exact when ``n = 1``."""
    return _density_from_cdf_left(left_tail_cdf_asymptote(model))


def right_tail_split(model: ModelSpec, p: int) -> TailAsymptote:
    """Asymptote of ``P[e^{Y_p} - sum_{k>=m} e^{Y_k} >= x]`` as ``x -> infinity``."""
    sol = solve(model.cov, FeasibleRegion.signed(model.n, model.m, p))
    require_assumption(sol, split=p)
    return _cdf_asymptote(model.mu, sol, "right")


def right_tail_single_positive(model: ModelSpec) -> TailAsymptote:
    """Right tail of ``e^{Y_0} - sum_{k>=1} e^{Y_k}`` (one positive term)."""
    if model.m != 1:
        raise DomainError(f"expected exactly one positive term, got m={model.m}")
    return right_tail_split(model, 0)


def _ties(values: dict[int, float], among, scale_floor: float) -> tuple[float, tuple[int, ...]]:
    best = max(values[p] for p in among)
    tol = TIE_RTOL * max(abs(best), scale_floor)
    return best, tuple(p for p in among if values[p] >= best - tol)


def right_tail_mixed(model: ModelSpec) -> DominanceSelection:
    """Right tail of ``X^{(m)}`` through its dominant single-positive splits.

    Splits with the largest ``delta4`` win; ties are broken by ``delta3`` and
    then ``delta2``; ``delta1`` is summed over the survivors. Values within
    relative tolerance ``1e-9`` count as equal.
    """
    per_split: dict[int, TailAsymptote] = {}
    for p in range(model.m):
        try:
            per_split[p] = right_tail_split(model, p)
        except AssumptionViolated as exc:
            raise type(exc)(str(exc), split=p, margins=exc.margins) from None
    splits = tuple(range(model.m))
    d4, p4 = _ties({p: a.delta4 for p, a in per_split.items()}, splits, 0.0)
    d3, p3 = _ties({p: a.delta3 for p, a in per_split.items()}, p4, 1.0)
    d2, p2 = _ties({p: a.delta2 for p, a in per_split.items()}, p3, 1.0)
    d1 = math.fsum(per_split[p].delta1 for p in p2)
    merged = TailAsymptote(
        delta1=d1,
        delta2=d2,
        delta3=d3,
        delta4=d4,
        constant_C=d1 / d4,
        tail="right",
        kind="cdf",
        reduced=per_split[p2[0]].reduced if len(p2) == 1 else None,
        error_order=ERROR_ORDER_SQRT_LOG,
    )
    return DominanceSelection(p4=p4, p3=p3, p2=p2, merged=merged, per_split=per_split)


def right_tail_cdf_asymptote(model: ModelSpec) -> TailAsymptote:
    return right_tail_mixed(model).merged


def right_tail_density_asymptote(sel: DominanceSelection | TailAsymptote) -> TailAsymptote:
    """Density ``(d1/d4) (log x)^{d2+1} x^{d3-1} exp(-log^2 x / (2 d4))``."""
    cdf = sel.merged if isinstance(sel, DominanceSelection) else sel
    return replace(
        cdf,
        delta1=cdf.delta1 / cdf.delta4,
        delta2=cdf.delta2 + 1.0,
        delta3=cdf.delta3 - 1.0,
        kind="density",
    )
