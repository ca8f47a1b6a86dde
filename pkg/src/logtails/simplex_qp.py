"""Simplex-constrained quadratic programs ``min w^T B w``.

The minimizer and its support decide which Gaussian components drive a tail.
Three feasible regions are supported, all of the form

    w_i = 0 outside a set F of free indices,
    s_i w_i >= 0 for i in F (s_i = +1 for plus-signed, -1 for minus-signed),
    sum_i w_i = 1.

On a candidate support J the minimizer of the equality-constrained problem is
``B_J^{-1} 1 / (1^T B_J^{-1} 1)`` and its value ``lam = 1 / (1^T B_J^{-1} 1)``.
It is the global minimizer iff the weights have the required signs on J and
every multiplier ``nu_i = s_i ((B w)_i - lam)`` is nonnegative off J.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from numpy.typing import ArrayLike, NDArray

from .errors import (
    AssumptionBorderline,
    AssumptionViolated,
    DomainError,
    InfeasibleRegion,
)
from .matrix_core import CovMatrix, as_cov, invert_with_rowsums, principal_submatrix

ENUMERATION_MAX_N = 16
ZERO_WEIGHT_RTOL = 1e-10
ASSUMPTION_TAU = 1e-9
KKT_TOL = 1e-9


@dataclass(frozen=True)
class FeasibleRegion:
    """One of the three simplex-type regions.

    Use the constructors :meth:`sum_simplex`, :meth:`signed` and :meth:`pair`.
    Indices are 0-based; ``m`` counts the plus-signed components, which come
    first.
    """

    kind: str
    n: int
    m: int
    p: int | None = None
    q: int | None = None

    @classmethod
    def sum_simplex(cls, n: int) -> "FeasibleRegion":
        return cls("sum", n, n)

    @classmethod
    def signed(cls, n: int, m: int, p: int) -> "FeasibleRegion":
        if not 0 <= p < m <= n:
            raise DomainError(f"signed region needs 0 <= p < m <= n, got p={p}, m={m}, n={n}")
        return cls("signed", n, m, p)

    @classmethod
    def pair(cls, n: int, m: int, p: int, q: int) -> "FeasibleRegion":
        if not (0 <= p < m and 0 <= q < m and p != q and m <= n):
            raise DomainError(f"pair region needs distinct p, q < m <= n, got p={p}, q={q}, m={m}")
        return cls("pair", n, m, min(p, q), max(p, q))

    @property
    def free(self) -> tuple[int, ...]:
        if self.kind == "sum":
            return tuple(range(self.n))
        head = (self.p,) if self.kind == "signed" else (self.p, self.q)
        return head + tuple(range(self.m, self.n))

    @property
    def signs(self) -> NDArray[np.float64]:
        """Sign constraint ``s_i`` for every index (0 for indices pinned at zero)."""
        s = np.zeros(self.n)
        for i in self.free:
            s[i] = 1.0 if i < self.m else -1.0
        return s

    @property
    def required(self) -> tuple[int, ...]:
        return (self.p,) if self.kind == "signed" else ()

    def contains(self, w: ArrayLike, tol: float = 1e-10) -> bool:
        w = np.asarray(w, dtype=float)
        s = self.signs
        pinned = s == 0
        return bool(
            w.shape == (self.n,)
            and abs(w.sum() - 1.0) <= tol
            and np.all(np.abs(w[pinned]) <= tol)
            and np.all(s[~pinned] * w[~pinned] >= -tol)
        )


@dataclass(frozen=True, eq=False)
class QpSolution:
    """Minimizer ``wbar`` with its support and the reduced inverse quantities.

    ``reduced_rowsums[k]`` belongs to index ``active_set[k]``.
    ``assumption_margins`` maps each free index off the support to
    ``(e^i - wbar)^T B wbar``.
    """

    wbar: NDArray[np.float64]
    active_set: tuple[int, ...]
    reduced_cov: CovMatrix
    reduced_inverse: NDArray[np.float64]
    reduced_rowsums: NDArray[np.float64]
    reduced_log_det: float
    min_value: float
    region: FeasibleRegion
    assumption_ok: bool
    assumption_margins: dict[int, float] = field(default_factory=dict)

    @property
    def nbar(self) -> int:
        return len(self.active_set)

    @property
    def rowsum_total(self) -> float:
        return float(np.sum(self.reduced_rowsums))


def _equality_solution(b: NDArray, support: Sequence[int]):
    idx = list(support)
    x = np.linalg.solve(b[np.ix_(idx, idx)], np.ones(len(idx)))
    total = x.sum()
    if not total > 0:
        return None, None
    return x / total, 1.0 / total


def _kkt_accepts(b, w, lam, support, region_signs, free, required) -> bool:
    s = region_signs[list(support)]
    if np.any(s * w[list(support)] <= 0):
        return False
    grad = b @ w
    off = [i for i in free if i not in support]
    if not off:
        return True
    nu = region_signs[off] * (grad[off] - lam)
    return bool(np.all(nu >= -KKT_TOL * lam))


def _enumerate(b, region: FeasibleRegion):
    free = region.free
    s = region.signs
    req = set(region.required)
    n_free = len(free)
    for size in range(n_free, 0, -1):
        for support in itertools.combinations(free, size):
            if not req.issubset(support):
                continue
            w_j, lam = _equality_solution(b, support)
            if w_j is None:
                continue
            w = np.zeros(region.n)
            w[list(support)] = w_j
            if _kkt_accepts(b, w, lam, support, s, free, req):
                return support
    raise InfeasibleRegion(f"no KKT point found for region {region}")


def _project(y: NDArray, s: NDArray) -> NDArray:
    """Euclidean projection onto ``{v >= 0, s^T v = 1}`` (bisection on the multiplier)."""
    def excess(tau):
        return float(np.sum(s * np.maximum(0.0, y + tau * s))) - 1.0

    lo, hi = -1.0, 1.0
    while excess(lo) > 0:
        lo *= 2.0
    while excess(hi) < 0:
        hi *= 2.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if excess(mid) < 0:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-15 * max(1.0, abs(mid)):
            break
    return np.maximum(0.0, y + 0.5 * (lo + hi) * s)


def _projected_gradient_then_refine(b, region: FeasibleRegion):
    free = list(region.free)
    s_all = region.signs
    s = s_all[free]
    # work in v = s * w on the free coordinates, where v >= 0 and s^T v = 1
    q = (s[:, None] * b[np.ix_(free, free)]) * s[None, :]
    step = 0.5 / float(np.linalg.eigvalsh(q)[-1])
    v = _project(np.full(len(free), 1.0 / len(free)), s)
    for _ in range(50_000):
        v_new = _project(v - step * 2.0 * (q @ v), s)
        if np.max(np.abs(v_new - v)) <= 1e-14:
            v = v_new
            break
        v = v_new
    support = {free[k] for k in np.flatnonzero(v > ZERO_WEIGHT_RTOL * v.max())}
    support |= set(region.required)
    req = set(region.required)

    for _ in range(10 * region.n + 10):
        supp = sorted(support)
        w_j, lam = _equality_solution(b, supp)
        if w_j is None:
            raise InfeasibleRegion(f"degenerate support {supp} for region {region}")
        signed = s_all[supp] * w_j
        bad = [i for i, v_i in zip(supp, signed) if v_i <= 0 and i not in req]
        if bad:
            worst = min(bad, key=lambda i: s_all[i] * w_j[supp.index(i)])
            support.discard(worst)
            continue
        w = np.zeros(region.n)
        w[supp] = w_j
        off = [i for i in free if i not in support]
        if not off:
            return tuple(supp)
        nu = s_all[off] * ((b @ w)[off] - lam)
        k = int(np.argmin(nu))
        if nu[k] >= -KKT_TOL * lam:
            return tuple(supp)
        support.add(off[k])
    raise InfeasibleRegion(f"active-set refinement did not converge for region {region}")


def _finalize(c: CovMatrix, region: FeasibleRegion, support: Sequence[int]) -> QpSolution:
    support = tuple(sorted(support))
    # crisp support: drop numerically zero weights and re-solve exactly
    while True:
        red = principal_submatrix(c, support)
        summ = invert_with_rowsums(red)
        rows = np.asarray(summ.row_sums)
        w_j = rows / rows.sum()
        tiny = np.abs(w_j) < ZERO_WEIGHT_RTOL * np.max(np.abs(w_j))
        if not np.any(tiny):
            break
        support = tuple(i for i, t in zip(support, tiny) if not t or i in region.required)
    wbar = np.zeros(region.n)
    wbar[list(support)] = w_j
    wbar.setflags(write=False)
    b = c.entries
    provisional = QpSolution(
        wbar=wbar,
        active_set=support,
        reduced_cov=red,
        reduced_inverse=summ.inverse,
        reduced_rowsums=summ.row_sums,
        reduced_log_det=summ.log_determinant,
        min_value=float(wbar @ b @ wbar),
        region=region,
        assumption_ok=False,
    )
    ok, margins = check_assumption(c, provisional, region)
    return QpSolution(
        **{**provisional.__dict__, "assumption_ok": ok, "assumption_margins": margins}
    )


def solve(cov: ArrayLike | CovMatrix, region: FeasibleRegion | None = None) -> QpSolution:
    """Unique minimizer of ``w^T B w`` over ``region`` (default: the sum simplex).

    Exact enumeration of candidate supports, largest first, for up to 16 free
    coordinates; above that a projected-gradient start followed by active-set
    refinement. Either way the result satisfies the KKT conditions and the
    weights on the support are ``B_J^{-1} 1 / (1^T B_J^{-1} 1)``.
    """
    c = as_cov(cov)
    if region is None:
        region = FeasibleRegion.sum_simplex(c.n)
    if region.n != c.n:
        raise DomainError(f"region dimension {region.n} does not match covariance dimension {c.n}")
    b = c.entries
    if len(region.free) <= ENUMERATION_MAX_N:
        support = _enumerate(b, region)
    else:
        support = _projected_gradient_then_refine(b, region)
    return _finalize(c, region, support)


def check_assumption(
    cov: ArrayLike | CovMatrix, sol: QpSolution, region: FeasibleRegion | None = None
) -> tuple[bool, dict[int, float]]:
    """Nondegeneracy verdict and the margins ``(e^i - wbar)^T B wbar``.

    Holds iff every free index outside the support has a multiplier
    bounded away from zero: margin ``> tau * lam`` for plus-signed indices and
    ``< -tau * lam`` for minus-signed ones, ``tau = 1e-9``.
    """
    c = as_cov(cov)
    region = region or sol.region
    b = c.entries
    w = np.asarray(sol.wbar)
    lam = float(w @ b @ w)
    grad = b @ w
    s = region.signs
    margins = {i: float(grad[i] - lam) for i in region.free if i not in sol.active_set}
    ok = all(s[i] * mg > ASSUMPTION_TAU * lam for i, mg in margins.items())
    return ok, margins


def require_assumption(sol: QpSolution, split: int | None = None) -> None:
    """Raise unless the nondegeneracy assumption holds for ``sol``."""
    if sol.assumption_ok:
        return
    s = sol.region.signs
    lam = sol.min_value
    where = "" if split is None else f" for split p={split}"
    for i, mg in sol.assumption_margins.items():
        if abs(mg) <= ASSUMPTION_TAU * lam:
            raise AssumptionBorderline(
                f"multiplier of index {i} is zero within tolerance{where} (margin {mg:.3e}); "
                "the tail is in the exceptional degenerate case",
                split=split,
                margins=sol.assumption_margins,
            )
    bad = [i for i, mg in sol.assumption_margins.items() if s[i] * mg <= ASSUMPTION_TAU * lam]
    raise AssumptionViolated(
        f"nondegeneracy assumption fails at indices {bad}{where}",
        split=split,
        margins=sol.assumption_margins,
    )


def two_lognormal_closed_form(sigma1: float, sigma2: float, rho: float) -> float:
    """Weight on the larger-variance component for ``n = 2`` over the sum simplex."""
    if not sigma1 >= sigma2 > 0:
        raise DomainError(f"need sigma1 >= sigma2 > 0, got {sigma1}, {sigma2}")
    if not -1 < rho < 1:
        raise DomainError(f"need |rho| < 1, got {rho}")
    num = sigma2 * (sigma2 - rho * sigma1)
    den = sigma1**2 + sigma2**2 - 2 * rho * sigma1 * sigma2
    return max(num / den, 0.0)
