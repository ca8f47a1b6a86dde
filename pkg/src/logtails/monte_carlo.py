"""Seedable Monte Carlo estimates of log-normal tail probabilities.

The importance-sampling estimator shifts the Gaussian mean by a drift
``Lambda`` and reweights by the likelihood ratio

    exp(-Lambda^T B^{-1} (Y - mu) - Lambda^T B^{-1} Lambda / 2),

evaluating the event at ``Y + Lambda`` with ``Y ~ N(mu, B)``. The drift
that minimizes the asymptotic second moment is affine in ``log x``.

Random streams: chunk ``k`` draws its standard normals from
``Philox(SeedSequence(seed, spawn_key=(k,)))``. Chunk results are combined
in chunk order with exactly rounded sums, so an estimate depends only on
``(seed, n_samples, chunk_size)`` and not on the number of workers.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Iterator, Sequence

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy.linalg import solve_triangular

from .errors import DomainError, NonSingletonDominance
from .kernels import accumulate_chunk
from .matrix_core import ModelSpec
from .simplex_qp import QpSolution
from .tail_asymptotics import _left_solution, right_tail_mixed

LOG_TINY = math.log(np.finfo(float).tiny)


@dataclass(frozen=True)
class McConfig:
    n_samples: int = 1_000_000
    seed: int = 0
    chunk_size: int = 50_000
    workers: int = 1
    jackknife_blocks: int = 20

    def __post_init__(self):
        if self.n_samples < 1 or self.chunk_size < 1 or self.workers < 1:
            raise DomainError("n_samples, chunk_size and workers must be positive")

    @property
    def chunks(self) -> list[int]:
        full, rest = divmod(self.n_samples, self.chunk_size)
        return [self.chunk_size] * full + ([rest] if rest else [])


@dataclass(frozen=True, eq=False)
class McEstimate:
    """Tail probability estimate.

    ``estimate`` and ``std_error`` are 0.0 when they underflow; the
    ``log_*`` fields are always meaningful (``-inf`` for a zero estimate).
    """

    estimate: float
    log_estimate: float
    std_error: float
    log_std_error: float
    rel_error: float
    n_used: int
    hits: int
    drift: NDArray[np.float64]
    log_weights_range: tuple[float, float]
    seed: int
    per_sample_log_var: float = field(default=-math.inf, repr=False)
    block_stats: tuple = field(default=(), repr=False)


@dataclass(frozen=True, eq=False)
class AffineDrift:
    """Drift ``slope * log x + offset``."""

    slope: NDArray[np.float64]
    offset: NDArray[np.float64]
    split: int | None = None

    def at(self, x: float) -> NDArray[np.float64]:
        return self.slope * math.log(x) + self.offset


def _rng(seed: int, chunk: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed, spawn_key=(chunk,))))


def _normals(seed: int, chunk: int, size: int, n: int) -> NDArray[np.float64]:
    return _rng(seed, chunk).standard_normal((size, n))


def sample_gaussian(model: ModelSpec, config: McConfig) -> Iterator[NDArray[np.float64]]:
    """Yield ``N(mu, B)`` samples chunk by chunk, shape ``(chunk, n)``."""
    chol = np.asarray(model.cov.chol)
    for k, size in enumerate(config.chunks):
        yield _normals(config.seed, k, size, model.n) @ chol.T + model.mu


def _drift_vector(model: ModelSpec, drift, x: float) -> NDArray[np.float64]:
    if drift is None:
        return np.zeros(model.n)
    lam = drift.at(x) if isinstance(drift, AffineDrift) else np.asarray(drift, dtype=float)
    if lam.shape != (model.n,):
        raise DomainError(f"drift has shape {lam.shape}, expected ({model.n},)")
    return lam


def _chunk_stats(model, x, config, lam, upper):
    chol = np.ascontiguousarray(model.cov.chol)
    alpha = solve_triangular(chol, lam, lower=True)
    log_shift = -0.5 * float(alpha @ alpha)
    center = np.ascontiguousarray(model.mu + lam)
    signs = np.ascontiguousarray(model.signs)
    sizes = config.chunks

    def run(k):
        z = _normals(config.seed, k, sizes[k], model.n)
        return accumulate_chunk(z, chol, center, signs, alpha, log_shift, float(x), bool(upper))

    if config.workers == 1:
        return [run(k) for k in range(len(sizes))]
    with ThreadPoolExecutor(max_workers=config.workers) as pool:
        return list(pool.map(run, range(len(sizes))))


def _moments(stats, n_total):
    """Log mean and log per-sample variance of the weights from chunk stats."""
    maxes = [s[2] for s in stats if s[0] > 0]
    if not maxes:
        return -math.inf, -math.inf
    top = max(maxes)
    s1 = math.fsum(s[3] * math.exp(s[2] - top) for s in stats if s[0] > 0)
    s2 = math.fsum(s[4] * math.exp(2.0 * (s[2] - top)) for s in stats if s[0] > 0)
    m1 = s1 / n_total
    var = s2 / n_total - m1 * m1
    log_mean = top + math.log(m1)
    log_var = 2.0 * top + math.log(var) if var > 0 else -math.inf
    return log_mean, log_var


def _estimate(model, x, config, drift, upper) -> McEstimate:
    if not x > 0:
        raise DomainError(f"level must be positive, got {x}")
    lam = _drift_vector(model, drift, x)
    stats = _chunk_stats(model, x, config, lam, upper)
    n_total = config.n_samples
    log_mean, log_var = _moments(stats, n_total)
    log_se = 0.5 * (log_var - math.log(n_total)) if log_var > -math.inf else -math.inf
    hits = sum(s[0] for s in stats)
    lo = min((s[1] for s in stats if s[0]), default=math.nan)
    hi = max((s[2] for s in stats if s[0]), default=math.nan)
    rel = math.exp(log_se - log_mean) if log_mean > -math.inf else math.inf
    return McEstimate(
        estimate=math.exp(log_mean) if log_mean > LOG_TINY else 0.0,
        log_estimate=log_mean,
        std_error=math.exp(log_se) if log_se > LOG_TINY else 0.0,
        log_std_error=log_se,
        rel_error=rel,
        n_used=n_total,
        hits=hits,
        drift=lam,
        log_weights_range=(lo, hi),
        seed=config.seed,
        per_sample_log_var=log_var,
        block_stats=tuple(stats),
    )


def estimate_left_standard(model: ModelSpec, x: float, config: McConfig) -> McEstimate:
    """Indicator mean of ``{X <= x}``; ``std_error = sqrt(F (1 - F) / N)``."""
    return _estimate(model, x, config, None, upper=False)


def estimate_right_standard(model: ModelSpec, x: float, config: McConfig) -> McEstimate:
    return _estimate(model, x, config, None, upper=True)


def estimate_left_is(model: ModelSpec, x: float, config: McConfig, drift=None) -> McEstimate:
    """Importance-sampled ``P[X <= x]``; the drift defaults to the optimal one at ``x``."""
    if drift is None:
        drift = optimal_drift_left(model)
    return _estimate(model, x, config, drift, upper=False)


def estimate_right_is(model: ModelSpec, x: float, config: McConfig, drift=None) -> McEstimate:
    """Importance-sampled ``P[X^{(m)} >= x]``; default drift from the dominant split."""
    if drift is None:
        drift = optimal_drift_right(model)
    return _estimate(model, x, config, drift, upper=True)


def _drift_from_solution(model: ModelSpec, sol: QpSolution, split=None) -> AffineDrift:
    b = model.cov.entries
    idx = list(sol.active_set)
    rows = np.asarray(sol.reduced_rowsums)
    # Lambda*_k = sum_{i,j in I} b_{k i} abar_{ij} (log x - log(sum A / |A_j|) - mu_j)
    weights = b[:, idx] @ sol.reduced_inverse
    slope = weights @ np.ones(len(idx))
    offset = -weights @ (np.log(rows.sum() / np.abs(rows)) + model.mu[idx])
    return AffineDrift(slope, offset, split)


def optimal_drift_left(model: ModelSpec) -> AffineDrift:
    return _drift_from_solution(model, _left_solution(model))


def optimal_drift_right(model: ModelSpec) -> AffineDrift:
    sel = right_tail_mixed(model)
    if len(sel.p4) != 1:
        raise NonSingletonDominance(f"dominant splits {list(sel.p4)} are tied")
    p = sel.p4[0]
    return _drift_from_solution(model, sel.per_split[p].reduced, split=p)


def _log_factor(log_f: float, log_var: float) -> float:
    if log_f == -math.inf or log_var == -math.inf:
        return math.nan
    f = math.exp(log_f)
    bern = log_f + (math.log1p(-f) if f < 1 else -math.inf)
    return 0.5 * (bern - log_var)


def _blocks(stats, sizes, n_blocks):
    n_blocks = max(1, min(n_blocks, len(stats)))
    edges = np.linspace(0, len(stats), n_blocks + 1).round().astype(int)
    return [(stats[a:b], sum(sizes[a:b])) for a, b in zip(edges[:-1], edges[1:])]


def reduction_factor(est: McEstimate, config: McConfig) -> tuple[float, float]:
    """Ratio of per-sample standard deviations, standard over importance-sampled.

    The standard estimator's deviation is the Bernoulli value
    ``sqrt(F (1 - F))`` at the importance-sampled ``F``. Returns the factor and
    its delete-one-block jackknife standard error.
    """
    factor = math.exp(_log_factor(est.log_estimate, est.per_sample_log_var))
    blocks = _blocks(list(est.block_stats), config.chunks, config.jackknife_blocks)
    if len(blocks) < 2:
        return factor, math.nan
    loo = []
    for skip in range(len(blocks)):
        kept = [s for b, (st, _) in enumerate(blocks) if b != skip for s in st]
        n_kept = sum(sz for b, (_, sz) in enumerate(blocks) if b != skip)
        lm, lv = _moments(kept, n_kept)
        loo.append(math.exp(_log_factor(lm, lv)))
    loo = np.asarray(loo)
    nb = len(loo)
    se = math.sqrt((nb - 1) / nb * float(np.sum((loo - loo.mean()) ** 2)))
    return factor, se


@dataclass(frozen=True)
class ReductionRow:
    x: float
    is_estimate: McEstimate
    standard_estimate: McEstimate
    factor: float
    factor_se: float


def reduction_table(
    model: ModelSpec,
    levels: Sequence[float],
    config: McConfig,
    tail: str | None = None,
    use_is: bool = True,
) -> list[ReductionRow]:
    """Importance-sampled and standard estimates with reduction factors per level.

    ``tail`` defaults to ``"left"`` for an all-positive sum and ``"right"``
    otherwise. With ``use_is=False`` the drift is zero and every factor is 1.
    """
    if not len(levels):
        raise DomainError("levels must be non-empty")
    tail = tail or ("left" if model.m == model.n else "right")
    upper = tail == "right"
    drift = None
    if use_is:
        drift = optimal_drift_right(model) if upper else optimal_drift_left(model)
    rows = []
    for x in levels:
        est = _estimate(model, x, config, drift, upper)
        std = _estimate(model, x, config, None, upper)
        factor, se = reduction_factor(est, config)
        rows.append(ReductionRow(float(x), est, std, factor, se))
    return rows


@dataclass(frozen=True, eq=False)
class ConditionalMoments:
    """Ratio estimates of ``E[e^{Y_i} | event]`` with delta-method standard errors."""

    probability: float
    log_probability: float
    means: NDArray[np.float64]
    std_errors: NDArray[np.float64]
    n_used: int


def estimate_conditional_moments(
    model: ModelSpec, x: float, config: McConfig, drift=None, tail: str = "left"
) -> ConditionalMoments:
    """Importance-sampled ``E[e^{Y_i} 1{event}] / P[event]`` for every component."""
    if tail not in ("left", "right"):
        raise DomainError(f"tail must be 'left' or 'right', got {tail!r}")
    upper = tail == "right"
    lam = _drift_vector(model, drift, x)
    chol = np.asarray(model.cov.chol)
    alpha = solve_triangular(chol, lam, lower=True)
    log_shift = -0.5 * float(alpha @ alpha)
    lws, ys = [], []
    for k, size in enumerate(config.chunks):
        z = _normals(config.seed, k, size, model.n)
        y = z @ chol.T + model.mu + lam
        total = np.exp(y) @ model.signs
        ev = total >= x if upper else total <= x
        lws.append(log_shift - z[ev] @ alpha)
        ys.append(y[ev])
    lw = np.concatenate(lws)
    y = np.concatenate(ys)
    n = config.n_samples
    if lw.size == 0:
        nan = np.full(model.n, math.nan)
        return ConditionalMoments(0.0, -math.inf, nan, nan, n)
    top = float(lw.max())
    w = np.exp(lw - top)
    g = np.exp(y)
    p_hat = w.sum() / n
    num = (w[:, None] * g).sum(axis=0) / n
    ratio = num / p_hat
    # delta method for a ratio of means over all N samples (zeros off the event)
    resid = w[:, None] * (g - ratio)
    var = (resid**2).sum(axis=0) / n
    se = np.sqrt(var / n) / p_hat
    log_p = top + math.log(p_hat)
    return ConditionalMoments(
        probability=math.exp(log_p) if log_p > LOG_TINY else 0.0,
        log_probability=log_p,
        means=ratio,
        std_errors=se,
        n_used=n,
    )
