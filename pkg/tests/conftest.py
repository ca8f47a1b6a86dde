import math

import numpy as np
import pytest
from scipy import integrate, stats

from logtails.matrix_core import CovMatrix, ModelSpec

SIGMA4 = (2.0, 2.3, 3.0, 3.0)


def const_corr_model(rho, mu=None, m=None, sigma=SIGMA4):
    cov = CovMatrix.from_sigma_rho(sigma, rho)
    mu = np.zeros(len(sigma)) if mu is None else np.asarray(mu, float)
    return ModelSpec(mu, cov, len(sigma) if m is None else m)


def random_spd(rng, n, scale=1.0):
    """Random covariance with a controlled condition number."""
    a = rng.normal(size=(n, n))
    q, _ = np.linalg.qr(a)
    eig = rng.uniform(0.2, 3.0, size=n) * scale
    b = q @ np.diag(eig) @ q.T
    return 0.5 * (b + b.T)


def random_model(rng, n, m=None, mu_scale=1.0):
    mu = rng.normal(scale=mu_scale, size=n)
    return ModelSpec(mu, CovMatrix(random_spd(rng, n)), n if m is None else m)


def pair_cdf_oracle(mu, b, x):
    """P[e^{Y1} + e^{Y2} <= x] by 1D quadrature over Y1."""
    s1, s2 = math.sqrt(b[0][0]), math.sqrt(b[1][1])
    r = b[0][1] / (s1 * s2)
    lx = math.log(x)
    csd = s2 * math.sqrt(1 - r * r)

    def f(y1):
        rest = x - math.exp(y1)
        if rest <= 0:
            return 0.0
        cm = mu[1] + r * s2 / s1 * (y1 - mu[0])
        return stats.norm.pdf(y1, mu[0], s1) * stats.norm.cdf((math.log(rest) - cm) / csd)

    # the integrand lives near the conditional mode; split the range for quad
    pts = np.linspace(lx - 12 * s1, lx, 400)
    return sum(integrate.quad(f, a, c, epsabs=0, epsrel=1e-10, limit=200)[0] for a, c in zip(pts[:-1], pts[1:]))


def pair_density_oracle(mu, b, x):
    """Density of e^{Y1} + e^{Y2} at x by 1D quadrature over Y1."""
    s1, s2 = math.sqrt(b[0][0]), math.sqrt(b[1][1])
    r = b[0][1] / (s1 * s2)
    lx = math.log(x)
    csd = s2 * math.sqrt(1 - r * r)

    def f(y1):
        rest = x - math.exp(y1)
        if rest <= 0:
            return 0.0
        cm = mu[1] + r * s2 / s1 * (y1 - mu[0])
        return stats.norm.pdf(y1, mu[0], s1) * stats.norm.pdf(math.log(rest), cm, csd) / rest

    pts = np.concatenate([np.linspace(lx - 15 * s1, lx - 1e-3, 600), [lx - 1e-9]])
    return sum(integrate.quad(f, a, c, epsabs=0, epsrel=1e-10, limit=200)[0] for a, c in zip(pts[:-1], pts[1:]))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pair_point_conditional_oracle(mu, b, lx):
    """``E[e^{Y_i} | e^{Y_1} + e^{Y_2} = x] / x`` for both components by quadrature.

    Parametrizes the level set by ``Y_1 = log x + log v``, ``Y_2 = log x +
    log(1 - v)`` with ``t = logit v``; the map ``(log x, t) -> (Y_1, Y_2)``
    has unit Jacobian.
    """
    from scipy.special import log_expit

    s1, s2 = math.sqrt(b[0][0]), math.sqrt(b[1][1])
    r = b[0][1] / (s1 * s2)
    csd = s2 * math.sqrt(1 - r * r)
    ts = np.linspace(-400.0, 400.0, 400_001)
    y1 = lx + log_expit(ts)
    y2 = lx + log_expit(-ts)
    cm = mu[1] + r * s2 / s1 * (y1 - mu[0])
    logw = stats.norm.logpdf(y1, mu[0], s1) + stats.norm.logpdf(y2, cm, csd)
    w = np.exp(logw - logw.max())
    z = integrate.trapezoid(w, ts)
    return (
        integrate.trapezoid(w * np.exp(log_expit(ts)), ts) / z,
        integrate.trapezoid(w * np.exp(log_expit(-ts)), ts) / z,
    )


ACCEPTANCE_LINES: list[str] = []


class Acceptance:
    """Records one PASS/FAIL line per acceptance criterion."""

    def record(self, number, ok, detail):
        line = f"criterion {number:>2}: {'PASS' if ok else 'FAIL'}  {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)
        return ok


@pytest.fixture
def acceptance():
    return Acceptance()


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split(":")[0].split()[1])):
            terminalreporter.write_line(line)
