"""Joint error localization across codewords.

Pools the per-position error magnitudes reported by every first-pass decode,
separates structured corruption from precision noise with a two-component
Gaussian mixture fitted in log-energy, counts how often each user's position
is flagged, and turns the dominant counts into erasure hints for a second
decoding pass.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, InvalidConfiguration

LOG_OFFSET = 1e-12
VARIANCE_FLOOR = 1e-12
# minimum distance between component means (log-energy units) for the split
# to be treated as two real clusters rather than an arbitrary cut of one
MIN_SEPARATION = 1.0


@dataclass
class ErrorEvidence:
    """Per-codeword position energies: row c is codeword c's length-N vector."""

    energies: np.ndarray
    ids: tuple = ()

    def __post_init__(self):
        self.energies = np.atleast_2d(np.asarray(self.energies, dtype=float))
        if np.any(self.energies < 0):
            raise DimensionMismatch("energies must be nonnegative")

    @classmethod
    def from_reports(cls, reports):
        """Merge ReconstructionReports (or (id, report) pairs) into one pool."""
        blocks, ids = [], []
        for item in reports:
            tag, rep = item if isinstance(item, tuple) else (None, item)
            blocks.append(rep.position_energies)
            ids.extend((tag, l) for l in range(rep.position_energies.shape[0]))
        return cls(energies=np.vstack(blocks), ids=tuple(ids))

    @property
    def n_codewords(self) -> int:
        return self.energies.shape[0]


@dataclass
class GmmModel:
    """Two-component 1-D mixture in log-energy, components ordered by mean."""

    weights: np.ndarray
    means: np.ndarray
    variances: np.ndarray
    converged: bool
    iterations: int
    log_likelihood: float = -np.inf


@dataclass
class FrequencyProfile:
    """counts[i-1] = number of codewords flagging user i as adversarial."""

    counts: np.ndarray
    total_codewords: int

    def __post_init__(self):
        self.counts = np.asarray(self.counts, dtype=int)
        if np.any(self.counts < 0) or np.any(self.counts > self.total_codewords):
            raise InvalidConfiguration("counts must lie in [0, total_codewords]")

    @property
    def n_users(self) -> int:
        return self.counts.size


def _log_pdf(y, means, variances):
    """(n_samples, 2) Gaussian log densities."""
    y = y[:, None]
    return -0.5 * (np.log(2 * np.pi * variances) + (y - means) ** 2 / variances)


def _fallback_model(y) -> GmmModel:
    mu = float(np.mean(y))
    var = max(float(np.var(y)), VARIANCE_FLOOR)
    return GmmModel(weights=np.array([1.0, 0.0]), means=np.array([mu, mu]),
                    variances=np.array([var, var]), converged=False, iterations=0)


def fit_gmm_1d(samples, max_iters: int = 200, tol: float = 1e-8,
               seed=None) -> GmmModel:
    """EM fit of a two-component Gaussian mixture to log-transformed energies.

    Initialization is a below/above-median split; the log-likelihood is
    non-decreasing across iterations by construction.  Degenerate input (no
    spread) yields a single-cluster fallback with converged=False.  `seed` is
    accepted for interface stability; the fit is deterministic.
    """
    samples = np.asarray(samples, dtype=float).ravel()
    if samples.size < 4:
        raise InvalidConfiguration("need at least 4 samples")
    y = np.log(samples + LOG_OFFSET)
    if np.ptp(y) < 1e-12:
        return _fallback_model(y)

    median = np.median(y)
    low, high = y[y <= median], y[y > median]
    if low.size == 0 or high.size == 0:
        return _fallback_model(y)
    means = np.array([np.mean(low), np.mean(high)])
    variances = np.maximum(np.array([np.var(low), np.var(high)]), VARIANCE_FLOOR)
    weights = np.array([low.size, high.size], dtype=float) / y.size

    prev_ll = -np.inf
    converged = False
    it = 0
    for it in range(1, max_iters + 1):
        log_joint = np.log(np.maximum(weights, 1e-300)) + _log_pdf(y, means, variances)
        mx = log_joint.max(axis=1, keepdims=True)
        joint = np.exp(log_joint - mx)
        norm = joint.sum(axis=1, keepdims=True)
        resp = joint / norm
        ll = float(np.sum(mx.ravel() + np.log(norm.ravel())))
        assert ll >= prev_ll - 1e-9 * max(1.0, abs(prev_ll)), "EM likelihood decreased"
        if ll - prev_ll < tol:
            converged = True
            prev_ll = ll
            break
        prev_ll = ll
        nk = resp.sum(axis=0)
        if np.any(nk < 1e-12):
            break  # one component died; keep previous parameters
        means = (resp * y[:, None]).sum(axis=0) / nk
        variances = np.maximum(
            (resp * (y[:, None] - means) ** 2).sum(axis=0) / nk, VARIANCE_FLOOR)
        weights = nk / y.size

    order = np.argsort(means)
    return GmmModel(weights=weights[order], means=means[order],
                    variances=variances[order], converged=converged,
                    iterations=it, log_likelihood=prev_ll)


def flag_positions(evidence: ErrorEvidence, gmm: GmmModel) -> list:
    """Per-codeword sets of positions whose energy looks adversarial.

    A (codeword, position) pair is flagged iff the posterior of the high-mean
    component exceeds one half; zero-energy positions are never flagged, and
    an unconverged or unseparated mixture flags nothing.
    """
    m = evidence.n_codewords
    if not gmm.converged or (gmm.means[1] - gmm.means[0]) < MIN_SEPARATION:
        return [set() for _ in range(m)]
    y = np.log(evidence.energies + LOG_OFFSET)
    flat = y.ravel()
    log_joint = np.log(np.maximum(gmm.weights, 1e-300)) + _log_pdf(flat, gmm.means, gmm.variances)
    mx = log_joint.max(axis=1, keepdims=True)
    joint = np.exp(log_joint - mx)
    post_high = (joint[:, 1] / joint.sum(axis=1)).reshape(evidence.energies.shape)
    flagged = (post_high > 0.5) & (evidence.energies > 0)
    return [set((np.nonzero(row)[0] + 1).tolist()) for row in flagged]


def build_frequency_profile(flags, n_users: int) -> FrequencyProfile:
    """Count, per user, the codewords that flagged that user's position."""
    counts = np.zeros(n_users, dtype=int)
    for flag_set in flags:
        for pos in flag_set:
            if not 1 <= pos <= n_users:
                raise InvalidConfiguration(f"flagged position {pos} out of range")
            counts[pos - 1] += 1
    return FrequencyProfile(counts=counts, total_codewords=len(list(flags)))


def erasure_hints(profile: FrequencyProfile, budget: int,
                  hint_floor: float = 0.05) -> tuple:
    """Most-flagged positions, capped at budget, ignoring near-noise counts.

    Positions whose count is at most hint_floor * total_codewords are never
    hinted; ties are broken toward the lower index.
    """
    if budget < 0:
        raise InvalidConfiguration("budget must be nonnegative")
    floor = hint_floor * profile.total_codewords
    candidates = [(int(-c), i + 1) for i, c in enumerate(profile.counts) if c > floor]
    candidates.sort()
    return tuple(sorted(pos for _, pos in candidates[:budget]))


def localize(evidence: ErrorEvidence, n_users: int, budget: int,
             hint_floor: float = 0.05):
    """One-shot pipeline: GMM fit, flagging, profile, hints.

    Returns (profile, hints, gmm).
    """
    gmm = fit_gmm_1d(evidence.energies)
    flags = flag_positions(evidence, gmm)
    profile = build_frequency_profile(flags, n_users)
    return profile, erasure_hints(profile, budget, hint_floor), gmm


def profile_to_csv(profiles, path) -> None:
    """Export (round, user, count, total_codewords) rows."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["round", "user", "count", "total_codewords"])
        for round_idx, profile in profiles:
            for user, count in enumerate(profile.counts, start=1):
                writer.writerow([round_idx, user, int(count), profile.total_codewords])
