"""Competing-risks event model with constant cause-specific intensities.

A subject starts in state 0 and leaves it at most once, either into one of
the absorbing states ``1..k`` or by censoring. Under constant intensities the
likelihood depends on the data only through the per-state event counts and
the total time at risk, so everything downstream works on
:class:`SufficientStats`.

Intensities carry the reciprocal of whatever time unit the exit times use
(days in the readmission application).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterator, Sequence

import numpy as np

__all__ = [
    "EventHistory",
    "GroupSample",
    "SufficientStats",
    "sufficient_stats",
    "mle",
    "log_likelihood",
    "expected_events",
]


@dataclass(frozen=True)
class EventHistory:
    """One subject: time of leaving state 0 and where it went (0 = censored)."""

    subject_id: str
    exit_time: float
    outcome: int


@dataclass(frozen=True, eq=False)
class GroupSample:
    """Observed histories of one group over the window ``[0, tau]``.

    Stored column-wise; ``exit_times[i]`` and ``outcomes[i]`` belong to
    ``subject_ids[i]``.
    """

    exit_times: np.ndarray
    outcomes: np.ndarray
    tau: float
    k: int
    group_label: int = 1
    subject_ids: tuple = field(default=())

    def __post_init__(self):
        times = np.asarray(self.exit_times, dtype=float)
        outcomes = np.asarray(self.outcomes, dtype=np.int64)
        if times.shape != outcomes.shape or times.ndim != 1:
            raise ValueError("exit_times and outcomes must be 1-d and of equal length")
        if not self.tau > 0:
            raise ValueError("tau must be positive")
        if self.k < 1:
            raise ValueError("k must be at least 1")
        if times.size:
            if not np.all(times > 0):
                raise ValueError("exit times must be strictly positive")
            if np.any(times > self.tau):
                raise ValueError("exit time exceeds tau")
            if np.any(outcomes < 0):
                raise ValueError("negative state")
            if np.any(outcomes > self.k):
                raise ValueError("unknown state")
        ids = tuple(self.subject_ids) if self.subject_ids else tuple(str(i) for i in range(times.size))
        if len(ids) != times.size:
            raise ValueError("subject_ids length does not match exit_times")
        times.setflags(write=False)
        outcomes.setflags(write=False)
        object.__setattr__(self, "exit_times", times)
        object.__setattr__(self, "outcomes", outcomes)
        object.__setattr__(self, "tau", float(self.tau))
        object.__setattr__(self, "subject_ids", ids)

    @classmethod
    def from_histories(cls, histories: Sequence[EventHistory], tau: float, k: int,
                       group_label: int = 1) -> "GroupSample":
        return cls(
            exit_times=np.array([h.exit_time for h in histories], dtype=float),
            outcomes=np.array([h.outcome for h in histories], dtype=np.int64),
            tau=tau,
            k=k,
            group_label=group_label,
            subject_ids=tuple(h.subject_id for h in histories),
        )

    def __len__(self) -> int:
        return self.exit_times.size

    def __iter__(self) -> Iterator[EventHistory]:
        for sid, t, o in zip(self.subject_ids, self.exit_times, self.outcomes):
            yield EventHistory(sid, float(t), int(o))

    @property
    def n_random_censored(self) -> int:
        """Subjects censored strictly before ``tau``."""
        return int(np.count_nonzero((self.outcomes == 0) & (self.exit_times < self.tau)))


@dataclass(frozen=True, eq=False)
class SufficientStats:
    """Event counts per state and total exposure (person-time in state 0)."""

    counts: np.ndarray
    exposure: float
    n_subjects: int
    tau: float
    n_random_censored: int = 0

    def __post_init__(self):
        counts = np.array(self.counts, dtype=np.int64)
        if counts.ndim != 1 or counts.size < 1:
            raise ValueError("counts must be a non-empty vector")
        if np.any(counts < 0):
            raise ValueError("counts must be non-negative")
        if self.exposure < 0:
            raise ValueError("exposure must be non-negative")
        if counts.sum() + self.n_random_censored > self.n_subjects:
            raise ValueError("more events than subjects")
        counts.setflags(write=False)
        object.__setattr__(self, "counts", counts)
        object.__setattr__(self, "exposure", float(self.exposure))

    @property
    def k(self) -> int:
        return self.counts.size

    def __eq__(self, other):
        if not isinstance(other, SufficientStats):
            return NotImplemented
        return (np.array_equal(self.counts, other.counts)
                and self.exposure == other.exposure
                and self.n_subjects == other.n_subjects
                and self.tau == other.tau
                and self.n_random_censored == other.n_random_censored)


def sufficient_stats(sample: GroupSample) -> SufficientStats:
    """Count transitions into each state and sum the time at risk.

    Every subject leaves state 0 at most once, so its time at risk is just
    its exit time.
    """
    if len(sample) == 0:
        raise ValueError("no subjects")
    if np.any(sample.outcomes > sample.k):
        raise ValueError("unknown state")
    counts = np.bincount(sample.outcomes, minlength=sample.k + 1)[1:]
    return SufficientStats(
        counts=counts,
        exposure=math.fsum(sample.exit_times),
        n_subjects=len(sample),
        tau=sample.tau,
        n_random_censored=sample.n_random_censored,
    )


def mle(stats: SufficientStats) -> np.ndarray:
    """Closed-form maximum likelihood intensities ``counts / exposure``."""
    if not stats.exposure > 0:
        raise ValueError("zero exposure")
    return stats.counts / stats.exposure


def log_likelihood(alpha, stats: SufficientStats) -> float:
    """Log-likelihood ``sum_j counts_j * log(alpha_j) - alpha_j * exposure``.

    Uses ``0 * log(0) = 0``; a zero intensity for a state with observed
    events gives ``-inf``.
    """
    alpha = np.asarray(alpha, dtype=float)
    if alpha.shape != stats.counts.shape:
        raise ValueError("alpha and counts differ in length")
    if np.any(alpha < 0) or not np.all(np.isfinite(alpha)):
        raise ValueError("intensities must be finite and non-negative")
    counts = stats.counts
    if np.any((alpha == 0) & (counts > 0)):
        return -math.inf
    pos = counts > 0
    return float(np.sum(counts[pos] * np.log(alpha[pos])) - np.sum(alpha) * stats.exposure)


def expected_events(rate: float, tau: float, n: int) -> float:
    """Rough number of transitions: ``rate * tau * n``.

    Treats every subject as at risk for the whole window, i.e. ignores the
    depletion of the risk set by earlier events. Adequate only when
    ``rate * tau`` is small; the exact multistate expectation is
    ``n * alpha_j / alpha_total * (1 - exp(-alpha_total * tau))``.
    """
    return rate * tau * n
