"""Maximum likelihood for two groups on the margin ``|a1[j0] - a2[j0]| = delta``.

The summed log-likelihood of the two groups is *maximized* under the
constraint. It separates over states, so every coordinate except ``j0``
keeps its unconstrained estimate. For ``j0`` write ``a2 = a1 - s * delta``
with ``s`` in ``{+1, -1}``; the stationarity condition

    N1 / a1 + N2 / (a1 - s * delta) = S1 + S2

is a quadratic in ``a1`` whose larger root is the unique maximizer on the
feasible set ``a1 > max(0, s * delta)``. Zero counts push the optimum to
the boundary, which the larger root reproduces as a limit. Both signs are
evaluated and the better one kept; exact ties go to the sign of the
unconstrained difference, then to ``+1``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .model import SufficientStats, log_likelihood, mle

__all__ = ["ConstrainedFit", "constrained_mle", "select_bootstrap_intensities"]


@dataclass(frozen=True, eq=False)
class ConstrainedFit:
    alpha1: np.ndarray
    alpha2: np.ndarray
    j0: int
    delta: float
    constrained_loglik: float
    sign: int


def _margin_root(n1: float, n2: float, s_total: float, shift: float) -> float:
    """Larger root of ``S a^2 - (S c + N1 + N2) a + N1 c = 0`` with ``c = shift``."""
    b = s_total * shift + n1 + n2
    disc = (s_total * shift - n1 - n2) ** 2 + 4.0 * s_total * shift * n2
    root = math.sqrt(max(disc, 0.0))
    if b >= 0:
        a = (b + root) / (2.0 * s_total)
    else:
        # avoid cancellation; product of roots is N1 c / S
        a = 2.0 * n1 * shift / (b - root)
    return max(a, shift, 0.0)


def _pair_loglik(a1: float, a2: float, n1: float, s1: float, n2: float, s2: float) -> float:
    def term(a, n, s):
        if n == 0:
            return -a * s
        if a <= 0:
            return -math.inf
        return n * math.log(a) - a * s

    return term(a1, n1, s1) + term(a2, n2, s2)


def constrained_mle(stats1: SufficientStats, stats2: SufficientStats, j0: int,
                    delta: float) -> ConstrainedFit:
    """Constrained MLE pair for state ``j0`` (1-based) at margin ``delta``."""
    if stats1.k != stats2.k:
        raise ValueError("groups have different numbers of states")
    if not 1 <= j0 <= stats1.k:
        raise ValueError(f"state index {j0} out of range 1..{stats1.k}")
    if not delta > 0:
        raise ValueError("delta must be positive")
    alpha1 = mle(stats1).copy()
    alpha2 = mle(stats2).copy()
    i = j0 - 1
    n1, n2 = float(stats1.counts[i]), float(stats2.counts[i])
    s1, s2 = stats1.exposure, stats2.exposure
    unconstrained_diff = alpha1[i] - alpha2[i]

    candidates = []
    for sign in (1, -1):
        shift = sign * delta
        a1 = _margin_root(n1, n2, s1 + s2, shift)
        a2 = a1 - shift
        if a2 < 0:
            a2 = 0.0
            a1 = shift
        candidates.append((_pair_loglik(a1, a2, n1, s1, n2, s2), sign, a1, a2))

    (ll_pos, _, *pos), (ll_neg, _, *neg) = candidates
    if ll_pos > ll_neg:
        sign, (a1, a2) = 1, pos
    elif ll_neg > ll_pos:
        sign, (a1, a2) = -1, neg
    else:
        sign = -1 if unconstrained_diff < 0 else 1
        a1, a2 = pos if sign == 1 else neg

    alpha1[i] = a1
    alpha2[i] = a2
    total = log_likelihood(alpha1, stats1) + log_likelihood(alpha2, stats2)
    return ConstrainedFit(alpha1, alpha2, j0, float(delta), total, sign)


def select_bootstrap_intensities(stats1: SufficientStats, stats2: SufficientStats,
                                 j0: int, delta: float) -> tuple[np.ndarray, np.ndarray]:
    """Intensities that generate the bootstrap data for the test of state ``j0``.

    The unconstrained estimates already lie in the null when their distance
    is at least ``delta``; otherwise the fit is pulled to the margin.
    """
    alpha1, alpha2 = mle(stats1), mle(stats2)
    if abs(alpha1[j0 - 1] - alpha2[j0 - 1]) >= delta:
        return alpha1, alpha2
    fit = constrained_mle(stats1, stats2, j0, delta)
    return fit.alpha1, fit.alpha2
