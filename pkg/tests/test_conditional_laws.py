import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from logtails.conditional_laws import (
    conditional_laplace_left,
    conditional_laplace_right,
    limiting_gaussian_left,
    limiting_gaussian_right,
)
from logtails.errors import AssumptionViolated, DomainError, NonSingletonDominance
from logtails.matrix_core import CovMatrix, ModelSpec
from logtails.simplex_qp import solve

from conftest import const_corr_model, pair_point_conditional_oracle, random_model

seeds = st.integers(min_value=0, max_value=2**32 - 1)
PAIR = ModelSpec([0.0, 0.0], CovMatrix.from_sigma_rho([3.0, 2.0], 0.9), 2)


def _left_or_none(model):
    try:
        return limiting_gaussian_left(model)
    except AssumptionViolated:
        return None


def test_zero_direction_gives_zero():
    x = math.exp(-12.0)
    assert conditional_laplace_left(const_corr_model(0.8), np.zeros(4), x) == 0.0
    assert conditional_laplace_right(const_corr_model(0.8, m=2), np.zeros(4), 1 / x) == 0.0


def test_pair_exponents():
    limit = limiting_gaussian_left(PAIR)
    np.testing.assert_allclose(limit.lambda_bar, [0.35, 0.0], atol=1e-12)
    np.testing.assert_allclose(limit.slope, [1.35, 1.0], atol=1e-12)
    assert limit.driving == (1,)
    x = 1e-4
    # the driving component satisfies E[e^{Y_2} | X = x] ~ x * wbar_2 = x
    assert conditional_laplace_left(PAIR, [0.0, 1.0], x) == pytest.approx(math.log(x), abs=1e-12)


def test_driving_components_carry_weights():
    model = const_corr_model(0.8, mu=[0.3, -0.2, 0.1, 0.0])
    limit = limiting_gaussian_left(model)
    sol = solve(model.cov)
    for i in sol.active_set:
        assert limit.lambda_bar[i] == pytest.approx(0.0, abs=1e-12)
        assert limit.mu_prime[i] == pytest.approx(math.log(sol.wbar[i]), abs=1e-10)
    for i in set(range(4)) - set(sol.active_set):
        assert limit.lambda_bar[i] > 0


def test_full_support_has_zero_covariance():
    model = const_corr_model(0.2)
    limit = limiting_gaussian_left(model)
    np.testing.assert_array_equal(limit.cov_prime, np.zeros((4, 4)))
    sol = solve(model.cov)
    np.testing.assert_allclose(limit.mu_prime, np.log(sol.wbar), atol=1e-10)


def test_log_laplace_shape_check():
    with pytest.raises(DomainError):
        limiting_gaussian_left(PAIR).log_laplace([1.0], 0.1)


@settings(max_examples=100, deadline=None)
@given(seeds, st.integers(2, 6))
def test_residual_covariance_is_psd_and_vanishes_on_support(seed, n):
    model = random_model(np.random.default_rng(seed), n)
    limit = _left_or_none(model)
    if limit is None:
        return
    b = model.cov.entries
    idx = list(limit.driving)
    bbar_inv = np.linalg.inv(b[np.ix_(idx, idx)])
    resid = b - b[:, idx] @ bbar_inv @ b[idx, :]
    # the residual vanishes on support rows and columns without being forced to
    assert np.max(np.abs(resid[idx, :])) <= 1e-9 * np.abs(b).max()
    eig = np.linalg.eigvalsh(limit.cov_prime)
    assert eig.min() >= -1e-10 * np.abs(b).max()
    assert np.all(limit.cov_prime[idx, :] == 0.0)


def test_residual_psd_on_sparse_supports():
    rng = np.random.default_rng(99)
    checked = 0
    for _ in range(400):
        n = int(rng.integers(3, 7))
        sigma = rng.uniform(0.5, 3.0, size=n)
        model = ModelSpec(rng.normal(size=n), CovMatrix.from_sigma_rho(sigma, rng.uniform(0.4, 0.9)), n)
        limit = _left_or_none(model)
        if limit is None or len(limit.driving) == n:
            continue
        checked += 1
        assert np.linalg.eigvalsh(limit.cov_prime).min() >= -1e-10
        if checked == 100:
            break
    assert checked == 100


@settings(max_examples=60, deadline=None)
@given(seeds, st.integers(1, 6))
def test_exponent_map_at_wbar_is_one(seed, n):
    model = random_model(np.random.default_rng(seed), n)
    limit = _left_or_none(model)
    if limit is None:
        return
    wbar = solve(model.cov).wbar
    assert float(wbar @ limit.slope) == pytest.approx(1.0, rel=1e-10)


@settings(max_examples=60, deadline=None)
@given(seeds, st.integers(1, 6), st.floats(-30.0, -2.0))
def test_log_convexity_in_direction(seed, n, lx):
    rng = np.random.default_rng(seed)
    model = random_model(rng, n)
    limit = _left_or_none(model)
    if limit is None:
        return
    u = rng.normal(size=n)
    x = math.exp(lx)
    total = limit.log_laplace(u, x) + limit.log_laplace(-u, x)
    assert total >= 2 * limit.log_laplace(np.zeros(n), x) - 1e-12


def test_right_tail_exponents_rho_08():
    model = const_corr_model(0.8, m=2)
    limit = limiting_gaussian_right(model)
    assert limit.split == 1
    assert set(limit.driving) == {1, 2, 3}
    np.testing.assert_allclose(limit.slope[[1, 2, 3]], 1.0, atol=1e-10)
    assert limit.slope[0] < 1.0
    sol = solve(model.cov, limit_region(model, 1))
    for i in (2, 3):
        assert limit.mu_prime[i] == pytest.approx(math.log(abs(sol.wbar[i])), abs=1e-10)


def limit_region(model, p):
    from logtails.simplex_qp import FeasibleRegion

    return FeasibleRegion.signed(model.n, model.m, p)


def test_right_tail_refuses_tied_dominance():
    model = const_corr_model(0.3, m=2, sigma=(2.0, 2.0, 1.5))
    with pytest.raises(NonSingletonDominance):
        limiting_gaussian_right(model)


@pytest.mark.parametrize("sigma,rho", [((3.0, 2.0), 0.9), ((1.0, 0.8), 0.5), ((1.0, 1.0), 0.2)])
def test_point_conditional_moments_against_quadrature(sigma, rho):
    mu = [0.3, -0.2]
    cov = CovMatrix.from_sigma_rho(sigma, rho)
    limit = limiting_gaussian_left(ModelSpec(mu, cov, 2))
    scaled_errors = []
    for lx in (-40.0, -160.0, -640.0):
        oracle = pair_point_conditional_oracle(mu, cov.entries, lx)
        for i in (0, 1):
            lead = math.exp(limit.log_laplace(np.eye(2)[i], math.exp(lx)) - lx)
            ratio = oracle[i] / lead
            # relative error of the leading term is O(1 / log(1/x))
            assert abs(ratio - 1) < 5.0 / abs(lx)
            scaled_errors.append(abs(lx) * abs(ratio - 1))
    assert max(scaled_errors) < 5.0
