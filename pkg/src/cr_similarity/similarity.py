"""Constrained parametric bootstrap test for similar transition intensities.

For every state ``j`` the null hypothesis is ``|a1[j] - a2[j]| >= delta[j]``.
Each per-state test generates bootstrap data from the closest model on (or
beyond) its margin and compares the observed distance with the bootstrap
distances. The global null (some state differs by at least its threshold)
is rejected only when every per-state test rejects, which keeps the level
without any multiplicity adjustment.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Optional, Sequence

import numpy as np

from ._rng import substream
from .constrained import select_bootstrap_intensities
from .model import GroupSample, SufficientStats, mle, sufficient_stats

__all__ = [
    "ADMINISTRATIVE",
    "EXPONENTIAL",
    "ConfigurationError",
    "TestConfig",
    "SimilarityTestResult",
    "simulate_group",
    "simulate_stats",
    "apply_censoring",
    "estimate_censor_rate",
    "state_test",
    "run_similarity_test",
    "threshold_grid",
]

ADMINISTRATIVE = "administrative_only"
EXPONENTIAL = "independent_exponential"

# replicates drawn per block; fixed so results never depend on worker count
_BLOCK = 256


class ConfigurationError(ValueError):
    pass


@dataclass(frozen=True)
class TestConfig:
    thresholds: tuple
    n_boot: int = 1000
    level: float = 0.05
    seed: int = 0
    censoring_mode: str = ADMINISTRATIVE

    __test__ = False  # not a pytest class

    def __post_init__(self):
        thresholds = tuple(float(d) for d in np.atleast_1d(self.thresholds))
        object.__setattr__(self, "thresholds", thresholds)
        if not thresholds:
            raise ConfigurationError("at least one threshold is required")
        if any(not (d > 0 and math.isfinite(d)) for d in thresholds):
            raise ConfigurationError("thresholds must be positive")
        if self.n_boot < 1:
            raise ConfigurationError("n_boot must be at least 1")
        if not 0 < self.level < 1:
            raise ConfigurationError("level must lie in (0, 1)")
        if self.censoring_mode not in (ADMINISTRATIVE, EXPONENTIAL):
            raise ConfigurationError(f"unknown censoring mode {self.censoring_mode!r}")

    @property
    def k(self) -> int:
        return len(self.thresholds)


@dataclass(frozen=True, eq=False)
class SimilarityTestResult:
    distances: np.ndarray
    p_values: np.ndarray
    boot_quantiles: np.ndarray
    per_state_reject: np.ndarray
    global_reject: bool
    mle1: np.ndarray
    mle2: np.ndarray
    n_boot_used: int
    config: Optional[TestConfig] = field(default=None)

    def to_dict(self) -> dict:
        def floats(xs):
            return [None if not math.isfinite(x) else float(x) for x in xs]

        out = {
            "distances": floats(self.distances),
            "p_values": floats(self.p_values),
            "boot_quantiles": floats(self.boot_quantiles),
            "per_state_reject": [bool(x) for x in self.per_state_reject],
            "global_reject": bool(self.global_reject),
            "mle1": floats(self.mle1),
            "mle2": floats(self.mle2),
            "n_boot_used": int(self.n_boot_used),
        }
        if self.config is not None:
            cfg = asdict(self.config)
            cfg["thresholds"] = list(cfg["thresholds"])
            out["config"] = cfg
        return out


def _draw(alpha, n, tau, rng, rows=None, censor_rate=0.0):
    """Observed times, event mask and causes of the events for ``n`` subjects.

    ``rows`` stacks independent copies along a leading axis. Event times are
    ``E / alpha_total``; the cause comes from one uniform per subject
    compared with the cumulative cause probabilities. With the random
    numbers held fixed, raising one intensity can only move subjects into
    that state, and earlier, which couples runs that differ only in their
    intensities.
    """
    alpha = np.asarray(alpha, dtype=float)
    shape = (n,) if rows is None else (rows, n)
    total = float(alpha.sum())
    e = rng.standard_exponential(shape)
    u = rng.random(shape)
    limit = float(tau)
    if censor_rate > 0:
        limit = np.minimum(limit, rng.standard_exponential(shape) / censor_rate)
    if total == 0:
        times = np.broadcast_to(limit, shape).copy()
        return times, np.zeros(shape, dtype=bool), np.zeros(0, dtype=np.int64)
    t = e / total
    # an event exactly at a random censoring time counts as an event
    event = t <= limit
    times = np.minimum(t, limit)
    cum = np.cumsum(alpha) / total
    # trailing zero-intensity states must stay unreachable under rounding
    cum[np.flatnonzero(alpha)[-1]:] = 1.0
    causes = np.searchsorted(cum, u[event], side="right") + 1
    return times, event, causes


def simulate_group(alpha, n: int, tau: float, rng: np.random.Generator,
                   group_label: int = 1) -> GroupSample:
    """Simulate ``n`` subjects from constant intensities ``alpha`` over ``[0, tau]``.

    Exponential time with the all-cause rate, then a categorical draw for
    the cause; subjects without an event by ``tau`` are censored there.
    """
    alpha = np.asarray(alpha, dtype=float)
    if np.any(alpha < 0) or not np.all(np.isfinite(alpha)):
        raise ValueError("intensities must be finite and non-negative")
    if n < 1:
        raise ValueError("n must be at least 1")
    if not tau > 0:
        raise ValueError("tau must be positive")
    times, event, causes = _draw(alpha, n, tau, rng)
    outcomes = np.zeros(n, dtype=np.int64)
    outcomes[event] = causes
    return GroupSample(times, outcomes, tau=tau, k=alpha.size, group_label=group_label)


def simulate_stats(alpha, n: int, tau: float, rng: np.random.Generator, size: int,
                   censor_rate: float = 0.0) -> tuple[np.ndarray, np.ndarray]:
    """Sufficient statistics of ``size`` independent simulated groups.

    Returns ``(counts, exposure)`` with shapes ``(size, k)`` and ``(size,)``.
    Row ``b`` has the same distribution as ``sufficient_stats`` of a
    :func:`simulate_group` draw (followed by exponential censoring when
    ``censor_rate > 0``).
    """
    alpha = np.asarray(alpha, dtype=float)
    k = alpha.size
    counts = np.empty((size, k), dtype=np.int64)
    exposure = np.empty(size, dtype=float)
    for start in range(0, size, _BLOCK):
        rows = min(_BLOCK, size - start)
        times, event, causes = _draw(alpha, n, tau, rng, rows=rows, censor_rate=censor_rate)
        row_of_event = np.nonzero(event)[0]
        tally = np.bincount(row_of_event * k + (causes - 1), minlength=rows * k)
        counts[start:start + rows] = tally.reshape(rows, k)
        exposure[start:start + rows] = times.sum(axis=1)
    return counts, exposure


def apply_censoring(sample: GroupSample, censor_rate: float,
                    rng: np.random.Generator) -> GroupSample:
    """Independent exponential censoring on top of the administrative one."""
    if censor_rate < 0:
        raise ValueError("censor_rate must be non-negative")
    if censor_rate == 0:
        return sample
    c = rng.standard_exponential(len(sample)) / censor_rate
    censored = c < sample.exit_times
    times = np.where(censored, c, sample.exit_times)
    outcomes = np.where(censored, 0, sample.outcomes)
    return GroupSample(times, outcomes, tau=sample.tau, k=sample.k,
                       group_label=sample.group_label, subject_ids=sample.subject_ids)


def estimate_censor_rate(sample) -> float:
    """Exponential censoring rate: random censorings per unit of exposure.

    Accepts a :class:`GroupSample` or its :class:`SufficientStats`. Only
    censorings before ``tau`` count; events act as censorings of the
    censoring process.
    """
    stats = sample if isinstance(sample, SufficientStats) else sufficient_stats(sample)
    if not stats.exposure > 0:
        raise ValueError("zero exposure")
    return stats.n_random_censored / stats.exposure


def _bootstrap_p_value(observed: float, boot: np.ndarray) -> float:
    return float(np.count_nonzero(boot <= observed)) / boot.size


def _order_statistic(boot_sorted: np.ndarray, level: float) -> float:
    idx = math.floor(boot_sorted.size * level)
    return -math.inf if idx == 0 else float(boot_sorted[idx - 1])


def state_test(stats1: SufficientStats, stats2: SufficientStats, j0: int,
               config: TestConfig, rng: np.random.Generator):
    """Bootstrap test of the null ``|a1[j0] - a2[j0]| >= delta[j0]``.

    Returns
    -------
    p_value : float
        Fraction of bootstrap distances ``<=`` the observed distance.
    boot_quantile : float
        The ``floor(B * level)``-th order statistic (1-based) of the bootstrap
        distances, ``-inf`` when that index is 0.
    boot_stats : ndarray
        Sorted bootstrap distances.
    """
    delta = config.thresholds[j0 - 1]
    a1, a2 = mle(stats1), mle(stats2)
    observed = abs(a1[j0 - 1] - a2[j0 - 1])
    gen1, gen2 = select_bootstrap_intensities(stats1, stats2, j0, delta)

    c1 = c2 = 0.0
    if config.censoring_mode == EXPONENTIAL:
        c1, c2 = estimate_censor_rate(stats1), estimate_censor_rate(stats2)

    b = config.n_boot
    counts1, expo1 = simulate_stats(gen1, stats1.n_subjects, stats1.tau, rng, b, c1)
    counts2, expo2 = simulate_stats(gen2, stats2.n_subjects, stats2.tau, rng, b, c2)
    boot = np.abs(counts1[:, j0 - 1] / expo1 - counts2[:, j0 - 1] / expo2)
    boot.sort()
    return _bootstrap_p_value(observed, boot), _order_statistic(boot, config.level), boot


def run_similarity_test(sample1, sample2, config: TestConfig,
                        workers: int = 1) -> SimilarityTestResult:
    """Per-state bootstrap tests combined by the intersection-union rule.

    ``sample1`` and ``sample2`` may be :class:`GroupSample` or
    :class:`SufficientStats`. State ``j`` draws from the substream
    ``(config.seed, j)``, so the result does not depend on ``workers``.
    """
    stats1 = sample1 if isinstance(sample1, SufficientStats) else sufficient_stats(sample1)
    stats2 = sample2 if isinstance(sample2, SufficientStats) else sufficient_stats(sample2)
    k = config.k
    if stats1.k != k or stats2.k != k:
        raise ConfigurationError(
            f"number of thresholds ({k}) does not match the states in the data "
            f"({stats1.k}, {stats2.k})")
    if stats1.tau != stats2.tau:
        raise ConfigurationError("groups observed over different windows (tau)")
    if config.censoring_mode == ADMINISTRATIVE and (stats1.n_random_censored
                                                    or stats2.n_random_censored):
        raise ConfigurationError(
            "data contain censorings before tau; enable exponential censoring")

    def one(j0):
        return state_test(stats1, stats2, j0, config, substream(config.seed, j0))

    if workers > 1 and k > 1:
        with ThreadPoolExecutor(max_workers=min(workers, k)) as pool:
            results = list(pool.map(one, range(1, k + 1)))
    else:
        results = [one(j0) for j0 in range(1, k + 1)]

    a1, a2 = mle(stats1), mle(stats2)
    p_values = np.array([r[0] for r in results])
    per_state = p_values < config.level
    return SimilarityTestResult(
        distances=np.abs(a1 - a2),
        p_values=p_values,
        boot_quantiles=np.array([r[1] for r in results]),
        per_state_reject=per_state,
        global_reject=bool(p_values.max() < config.level),
        mle1=a1,
        mle2=a2,
        n_boot_used=config.n_boot,
        config=config,
    )


def threshold_grid(sample1, sample2, grid: Sequence[Sequence[float]], config: TestConfig,
                   workers: int = 1) -> list[SimilarityTestResult]:
    """Repeat the test for several threshold vectors with the same seed."""
    out = []
    for thresholds in grid:
        cfg = TestConfig(tuple(thresholds), config.n_boot, config.level, config.seed,
                         config.censoring_mode)
        out.append(run_similarity_test(sample1, sample2, cfg, workers=workers))
    return out
