"""Resilience-bound evaluators for plain and feedback-weighted Krum.

These evaluate the closed-form deviation-angle bounds and the dominance
condition under which the feedback-weighted rule beats plain Krum; they do
not prove anything.  Empirical inputs (confidence-ratio statistics and the
fourth-moment constant) are estimated from run data.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InsufficientData, InvalidConfiguration


@dataclass(frozen=True)
class TheoryParams:
    n_users: int
    byzantine_bound: int
    dim: int
    sigma_g: float       # honest update std per coordinate
    sigma_eps: float     # reconstruction noise std per coordinate
    g_norm: float        # norm of the expected true update

    def __post_init__(self):
        if 2 * self.byzantine_bound + 2 >= self.n_users:
            raise InvalidConfiguration("need 2A + 2 < N")
        if self.sigma_g < 0 or self.sigma_eps < 0:
            raise InvalidConfiguration("standard deviations must be nonnegative")
        if self.g_norm <= 0:
            raise InvalidConfiguration("g_norm must be positive")
        if self.dim < 1:
            raise InvalidConfiguration("dim must be >= 1")

    @property
    def sigma_prime(self) -> float:
        """Effective per-coordinate std of the surrogate updates."""
        return float(np.sqrt(self.sigma_g ** 2 + 0.5 * self.sigma_eps ** 2))


@dataclass(frozen=True)
class FeedbackStats:
    """Moments of the confidence-ratio extremes plus the fourth-moment constant."""

    mu_t: float
    sigma_t: float
    mu_q: float
    sigma_q: float
    c1: float

    def __post_init__(self):
        if self.mu_t <= 0:
            raise InvalidConfiguration("mu_t must be positive")
        if self.sigma_t < 0 or self.sigma_q < 0:
            raise InvalidConfiguration("standard deviations must be nonnegative")
        if self.c1 < 1:
            raise InvalidConfiguration("c1 must be >= 1")


@dataclass(frozen=True)
class BoundValue:
    value: float
    hypothesis_ok: bool


def eta(n_users: int, byzantine_bound: int) -> float:
    """Neighborhood-inflation factor of the plain-Krum resilience bound."""
    n, a = n_users, byzantine_bound
    if 2 * a + 2 >= n:
        raise InvalidConfiguration("need 2A + 2 < N")
    return float(np.sqrt(n - a + (a * (n - a - 2) + a * a * (n - a - 1)) / (n - 2 * a - 2)))


def sin_alpha(params: TheoryParams) -> BoundValue:
    """Deviation-angle sine for plain Krum on noisy surrogate updates.

    hypothesis_ok is False when the bound's validity condition
    2*eta*sqrt(d)*sigma' < ||g|| fails (the value is still returned).
    """
    e = eta(params.n_users, params.byzantine_bound)
    val = 2.0 * e * np.sqrt(params.dim) * params.sigma_prime / params.g_norm
    return BoundValue(value=float(val), hypothesis_ok=bool(val < 1.0))


def eta_prime(n_users: int, byzantine_bound: int) -> float:
    n, a = n_users, byzantine_bound
    if 2 * a + 2 >= n:
        raise InvalidConfiguration("need 2A + 2 < N")
    return float((n - a - 2) / (n - 2 * a - 2) + a * (n - a - 1) / (n - 2 * a - 2))


def _dominance_lhs(params: TheoryParams, stats: FeedbackStats) -> float:
    n, a = params.n_users, params.byzantine_bound
    ep = eta_prime(n, a)
    psi_t = np.sqrt((stats.sigma_t ** 2 + stats.mu_t ** 2) * stats.c1)
    psi_q = np.sqrt((stats.sigma_q ** 2 + stats.mu_q ** 2) * stats.c1)
    return float(a * (ep * psi_t + ep / (n - a - 2) * psi_q) + (n - a))


def sin_alpha_mod(params: TheoryParams, stats: FeedbackStats) -> BoundValue:
    """Deviation-angle sine for the feedback-weighted Krum rule."""
    lhs = _dominance_lhs(params, stats)
    val = np.sqrt(lhs * 4.0 * params.dim * params.sigma_prime ** 2) / params.g_norm
    return BoundValue(value=float(val), hypothesis_ok=bool(val < 1.0))


def corollary_condition(params: TheoryParams, stats: FeedbackStats) -> bool:
    """True iff the feedback-weighted bound is strictly tighter than plain Krum's."""
    e = eta(params.n_users, params.byzantine_bound)
    return _dominance_lhs(params, stats) < e * e


def surrogate_samples(params: TheoryParams, n_samples: int, rng=None) -> np.ndarray:
    """Draws of surrogate pairwise differences v_i - v_j ~ N(0, 2*sigma'^2 I)."""
    rng = np.random.default_rng(rng)
    return rng.normal(scale=params.sigma_prime * np.sqrt(2.0),
                      size=(n_samples, params.dim))


def coordinate_correlation(samples_a: np.ndarray, samples_b: np.ndarray) -> float:
    """Diagnostic: mean per-coordinate correlation between two surrogate streams."""
    a = samples_a - samples_a.mean(axis=0)
    b = samples_b - samples_b.mean(axis=0)
    num = (a * b).mean(axis=0)
    den = a.std(axis=0) * b.std(axis=0)
    mask = den > 0
    if not np.any(mask):
        return 0.0
    return float(np.mean(num[mask] / den[mask]))


def estimate_feedback_stats(lambda_history, surrogate_diffs) -> FeedbackStats:
    """Empirical moments of the per-round confidence-ratio extremes.

    Per round, t = max over ordered pairs of lambda_i / lambda_k and
    q = max over ordered pairs of 1 - lambda_i / lambda_k; c1 is the
    fourth-to-squared-second moment ratio of the surrogate difference norms.
    """
    lams = [np.asarray(getattr(lv, "lam", lv), dtype=float) for lv in lambda_history]
    if len(lams) < 2:
        raise InsufficientData("need at least 2 rounds of confidence history")
    t_vals, q_vals = [], []
    for lam in lams:
        lo, hi = float(np.min(lam)), float(np.max(lam))
        if lo <= 0:
            raise InvalidConfiguration("confidences must be positive")
        t_vals.append(hi / lo)
        q_vals.append(1.0 - lo / hi)
    diffs = np.asarray(surrogate_diffs, dtype=float)
    sq = np.sum(diffs ** 2, axis=1)
    c1 = float(np.mean(sq ** 2) / np.mean(sq) ** 2) if sq.size else 1.0
    return FeedbackStats(mu_t=float(np.mean(t_vals)), sigma_t=float(np.std(t_vals)),
                         mu_q=float(np.mean(q_vals)), sigma_q=float(np.std(q_vals)),
                         c1=max(c1, 1.0))
