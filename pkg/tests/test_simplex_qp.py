import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.optimize import minimize

from logtails.errors import AssumptionBorderline, AssumptionViolated, DomainError
from logtails.matrix_core import CovMatrix
from logtails.simplex_qp import (
    FeasibleRegion,
    check_assumption,
    require_assumption,
    solve,
    two_lognormal_closed_form,
)

from conftest import SIGMA4, random_spd


def slsqp_oracle(b, region):
    """Independent minimizer of w^T B w over ``region`` via SLSQP."""
    s = region.signs
    free = list(region.free)
    k = len(free)

    def full(v):
        w = np.zeros(region.n)
        w[free] = v
        return w

    bounds = [(0, None) if s[i] > 0 else (None, 0) for i in free]
    x0 = np.array([1.0 if s[i] > 0 else 0.0 for i in free])
    x0 /= x0.sum()
    res = minimize(
        lambda v: full(v) @ b @ full(v),
        x0,
        jac=lambda v: 2 * (b @ full(v))[free],
        bounds=bounds,
        constraints=[{"type": "eq", "fun": lambda v: v.sum() - 1.0, "jac": lambda v: np.ones(k)}],
        method="SLSQP",
        options={"ftol": 1e-15, "maxiter": 1000},
    )
    return full(res.x), res.fun


def test_identity_gives_uniform_weights():
    sol = solve(np.eye(5))
    np.testing.assert_allclose(sol.wbar, np.full(5, 0.2))
    assert sol.assumption_ok  # nothing off the support


def test_constant_correlation_rho_02():
    sol = solve(CovMatrix.from_sigma_rho(SIGMA4, 0.2))
    np.testing.assert_allclose(sol.wbar, [0.44, 0.30, 0.13, 0.13], atol=0.01)
    assert sol.active_set == (0, 1, 2, 3)


def test_constant_correlation_rho_08():
    sol = solve(CovMatrix.from_sigma_rho(SIGMA4, 0.8))
    np.testing.assert_allclose(sol.wbar, [0.83, 0.17, 0.0, 0.0], atol=0.01)
    assert sol.active_set == (0, 1)
    assert sol.assumption_ok
    assert sol.wbar[2] == 0.0 and sol.wbar[3] == 0.0


def test_signed_split_rho_08():
    c = CovMatrix.from_sigma_rho(SIGMA4, 0.8)
    first = solve(c, FeasibleRegion.signed(4, 2, 0))
    np.testing.assert_allclose(first.wbar[[0, 2, 3]], [1.32, -0.16, -0.16], atol=0.01)
    assert first.wbar[1] == 0.0
    second = solve(c, FeasibleRegion.signed(4, 2, 1))
    np.testing.assert_allclose(second.wbar[[1, 2, 3]], [1.1, -0.05, -0.05], atol=0.01)
    assert second.min_value > first.min_value


def test_signed_split_rho_02_vertices():
    c = CovMatrix.from_sigma_rho(SIGMA4, 0.2)
    for p in (0, 1):
        sol = solve(c, FeasibleRegion.signed(4, 2, p))
        expect = np.zeros(4)
        expect[p] = 1.0
        np.testing.assert_allclose(sol.wbar, expect, atol=1e-12)
        assert sol.min_value == pytest.approx(c.entries[p, p])
        assert sol.assumption_ok


def test_pair_region_contains_both_positives():
    c = CovMatrix.from_sigma_rho(SIGMA4, 0.3)
    region = FeasibleRegion.pair(4, 2, 0, 1)
    sol = solve(c, region)
    assert region.contains(sol.wbar)
    w, val = slsqp_oracle(c.entries, region)
    assert sol.min_value <= val + 1e-10
    np.testing.assert_allclose(sol.wbar, w, atol=1e-5)


def test_region_constructors_validate():
    with pytest.raises(DomainError):
        FeasibleRegion.signed(3, 2, 2)
    with pytest.raises(DomainError):
        FeasibleRegion.pair(3, 2, 1, 1)
    with pytest.raises(DomainError):
        solve(np.eye(3), FeasibleRegion.sum_simplex(2))


def test_two_lognormal_assumption_holds_above_threshold():
    c = CovMatrix.from_sigma_rho([3.0, 2.0], 0.9)
    sol = solve(c)
    np.testing.assert_allclose(sol.wbar, [0.0, 1.0])
    ok, margins = check_assumption(c, sol)
    assert ok and margins[0] > 0
    require_assumption(sol)


def test_two_lognormal_borderline_case_is_rejected():
    c = CovMatrix.from_sigma_rho([3.0, 2.0], 2.0 / 3.0)
    sol = solve(c)
    np.testing.assert_allclose(sol.wbar, [0.0, 1.0], atol=1e-12)
    ok, margins = check_assumption(c, sol)
    assert not ok
    assert abs(margins[0]) < 1e-12
    with pytest.raises(AssumptionBorderline) as info:
        require_assumption(sol)
    assert isinstance(info.value, AssumptionViolated)
    assert 0 in info.value.margins


@pytest.mark.parametrize(
    "s1,s2,rho,expected",
    [(1.0, 1.0, 0.0, 0.5), (3.0, 2.0, 0.9, 0.0), (2.0, 1.0, 0.25, 0.125)],
)
def test_closed_form_examples(s1, s2, rho, expected):
    assert two_lognormal_closed_form(s1, s2, rho) == pytest.approx(expected)


def test_closed_form_requires_sorted_sigmas():
    with pytest.raises(DomainError):
        two_lognormal_closed_form(1.0, 2.0, 0.0)


seeds = st.integers(min_value=0, max_value=2**32 - 1)


@settings(max_examples=200, deadline=None)
@given(
    st.floats(0.1, 5.0),
    st.floats(0.1, 5.0),
    st.floats(-0.95, 0.95),
)
def test_closed_form_matches_solver(a, b, rho):
    s1, s2 = max(a, b), min(a, b)
    sol = solve(CovMatrix.from_sigma_rho([s1, s2], rho))
    assert sol.wbar[0] == pytest.approx(two_lognormal_closed_form(s1, s2, rho), abs=1e-8)


def _kkt_ok(b, sol, tol=1e-8):
    w = sol.wbar
    lam = float(w @ b @ w)
    g = b @ w
    s = sol.region.signs
    idx = list(sol.active_set)
    if not np.allclose(g[idx], lam, rtol=tol, atol=tol * abs(lam)):
        return False
    return all(s[i] * (g[i] - lam) >= -tol * lam for i in sol.region.free if i not in idx)


@settings(max_examples=80, deadline=None)
@given(seeds, st.integers(1, 7))
def test_sum_simplex_invariants(seed, n):
    b = random_spd(np.random.default_rng(seed), n)
    sol = solve(b)
    assert sol.region.contains(sol.wbar)
    assert _kkt_ok(b, sol)
    assert sol.min_value == pytest.approx(1.0 / sol.rowsum_total, rel=1e-10)
    assert np.all(np.asarray(sol.reduced_rowsums) > 0)
    assert sol.min_value <= np.min(np.diag(b)) * (1 + 1e-12)
    w, val = slsqp_oracle(b, sol.region)
    assert sol.min_value <= val * (1 + 1e-9)
    np.testing.assert_allclose(sol.wbar, w, atol=2e-4)


@settings(max_examples=80, deadline=None)
@given(seeds, st.integers(2, 7), st.data())
def test_signed_simplex_invariants(seed, n, data):
    b = random_spd(np.random.default_rng(seed), n)
    m = data.draw(st.integers(1, n - 1))
    p = data.draw(st.integers(0, m - 1))
    region = FeasibleRegion.signed(n, m, p)
    sol = solve(b, region)
    assert region.contains(sol.wbar)
    assert _kkt_ok(b, sol)
    assert sol.min_value <= b[p, p] * (1 + 1e-12)
    assert sol.min_value == pytest.approx(1.0 / sol.rowsum_total, rel=1e-10)
    rows = dict(zip(sol.active_set, np.asarray(sol.reduced_rowsums)))
    assert rows[p] > 0
    assert all(v < 0 for i, v in rows.items() if i != p)
    w, val = slsqp_oracle(b, region)
    assert sol.min_value <= val * (1 + 1e-9)


@settings(max_examples=60, deadline=None)
@given(seeds, st.integers(1, 7), st.floats(1e-3, 1e3))
def test_scale_invariance(seed, n, c):
    b = random_spd(np.random.default_rng(seed), n)
    base, scaled = solve(b), solve(c * b)
    np.testing.assert_allclose(scaled.wbar, base.wbar, atol=1e-10)
    assert scaled.min_value == pytest.approx(c * base.min_value, rel=1e-10)


@settings(max_examples=60, deadline=None)
@given(seeds, st.integers(1, 7))
def test_permutation_equivariance(seed, n):
    rng = np.random.default_rng(seed)
    b = random_spd(rng, n)
    perm = rng.permutation(n)
    base = solve(b)
    moved = solve(b[np.ix_(perm, perm)])
    np.testing.assert_allclose(moved.wbar, base.wbar[perm], atol=1e-10)


@settings(max_examples=60, deadline=None)
@given(seeds, st.integers(1, 7))
def test_restricted_resolve_is_identical(seed, n):
    b = random_spd(np.random.default_rng(seed), n)
    sol = solve(b)
    idx = list(sol.active_set)
    sub = solve(b[np.ix_(idx, idx)])
    np.testing.assert_allclose(sub.wbar, sol.wbar[idx], atol=1e-10)


def _low_support_cov(rng, n):
    # constant-correlation matrices with spread variances give sparse supports
    sigma = np.sort(rng.uniform(0.5, 3.0, size=n))
    return CovMatrix.from_sigma_rho(sigma, rng.uniform(0.3, 0.9)).entries


@pytest.mark.parametrize("seed", range(5))
def test_large_n_path_matches_enumeration(seed, monkeypatch):
    import logtails.simplex_qp as qp

    rng = np.random.default_rng(seed)
    b = _low_support_cov(rng, 12) if seed % 2 else random_spd(rng, 12)
    exact = solve(b)
    monkeypatch.setattr(qp, "ENUMERATION_MAX_N", 4)
    iterative = solve(b)
    assert iterative.active_set == exact.active_set
    np.testing.assert_allclose(iterative.wbar, exact.wbar, atol=1e-10)


@pytest.mark.parametrize("seed", range(3))
def test_large_n_sum_simplex(seed):
    rng = np.random.default_rng(seed)
    b = _low_support_cov(rng, 30)
    sol = solve(b)
    assert sol.region.contains(sol.wbar)
    assert _kkt_ok(b, sol)
    w, val = slsqp_oracle(b, sol.region)
    assert sol.min_value <= val * (1 + 1e-8)


def test_large_n_signed_simplex():
    rng = np.random.default_rng(7)
    b = random_spd(rng, 24)
    region = FeasibleRegion.signed(24, 5, 2)
    sol = solve(b, region)
    assert region.contains(sol.wbar)
    assert _kkt_ok(b, sol)
    _, val = slsqp_oracle(b, region)
    assert sol.min_value <= val * (1 + 1e-8)
