"""Krum scoring, decoder-feedback confidences, and user selection."""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, InvalidConfiguration
from .joint_localizer import FrequencyProfile

RULES = ("fedavg", "krum", "modified_krum")


@dataclass
class DistanceMatrix:
    """Symmetric matrix of squared norms of reconstructed pairwise differences."""

    d: np.ndarray

    def __post_init__(self):
        self.d = np.asarray(self.d, dtype=float)
        n = self.d.shape[0]
        if self.d.shape != (n, n):
            raise DimensionMismatch("distance matrix must be square")

    @property
    def n_users(self) -> int:
        return self.d.shape[0]


@dataclass
class ScoreTable:
    scores: np.ndarray
    neighbor_sets: list  # per-user tuple of the N-A-2 nearest other users


@dataclass
class ConfidenceVector:
    lam: np.ndarray
    temperature: float


@dataclass
class SelectionSet:
    users: tuple  # 1-based indices, sorted ascending
    rule: str


def distances(diff_vectors: dict, n_users: int) -> DistanceMatrix:
    """Squared Euclidean norms of the per-pair reconstructed differences.

    diff_vectors maps each unordered pair (j, k), j < k, to its vector.
    """
    d = np.zeros((n_users, n_users))
    expected = {(j, k) for j in range(1, n_users + 1) for k in range(j + 1, n_users + 1)}
    got = set(diff_vectors)
    if got != expected:
        raise InvalidConfiguration(f"missing pairs: {sorted(expected - got)[:5]} ...")
    for (j, k), vec in diff_vectors.items():
        val = float(np.sum(np.asarray(vec, dtype=float) ** 2))
        d[j - 1, k - 1] = d[k - 1, j - 1] = val
    return DistanceMatrix(d)


def krum_scores(dist: DistanceMatrix, byzantine_bound: int) -> ScoreTable:
    """Sum of each user's squared distances to its N-A-2 nearest neighbors.

    Ties in neighbor choice are broken toward the lower user index.
    """
    n = dist.n_users
    n_neighbors = n - byzantine_bound - 2
    if n_neighbors < 1:
        raise InvalidConfiguration(f"need N - A - 2 >= 1, got N={n}, A={byzantine_bound}")
    scores = np.zeros(n)
    neighbor_sets = []
    idx = np.arange(n)
    for i in range(n):
        others = idx[idx != i]
        row = dist.d[i, others]
        order = np.lexsort((others, row))[:n_neighbors]
        chosen = others[order]
        scores[i] = float(row[order].sum())
        neighbor_sets.append(tuple(int(c) + 1 for c in sorted(chosen)))
    return ScoreTable(scores=scores, neighbor_sets=neighbor_sets)


def soft_confidences(profile: FrequencyProfile, temperature: float = 0.1) -> ConfidenceVector:
    """Softmax suspicion weights from the flag-count profile.

    Counts are normalized to [0, 1] by the maximum count before the softmax
    so the temperature keeps its meaning across problem sizes.
    """
    if temperature <= 0:
        raise InvalidConfiguration("temperature must be positive")
    counts = profile.counts.astype(float)
    denom = max(counts.max(), 1.0)
    z = counts / denom / temperature
    z -= z.max()
    e = np.exp(z)
    return ConfidenceVector(lam=e / e.sum(), temperature=temperature)


def modified_scores(table: ScoreTable, conf: ConfidenceVector,
                    n_users: int, byzantine_bound: int) -> np.ndarray:
    """Interpolate each Krum score toward the stabilized baseline.

    S_i_mod = lambda_i * S_i + (1 - lambda_i) * S_min with
    S_min = min_i S_i / (N - A - 2): heavily flagged users keep their own
    score's influence, lightly flagged ones are nudged to the baseline.
    """
    if len(table.scores) != n_users or len(conf.lam) != n_users:
        raise DimensionMismatch("score table and confidences must cover the same users")
    s_min = float(np.min(table.scores)) / (n_users - byzantine_bound - 2)
    return conf.lam * table.scores + (1.0 - conf.lam) * s_min


def select(scores, m: int, rule: str = "krum") -> SelectionSet:
    """Users with the m smallest scores (ties toward the lower index).

    The fedavg rule ignores the scores and selects everyone.
    """
    scores = np.asarray(scores, dtype=float)
    n = scores.size
    if rule not in RULES:
        raise InvalidConfiguration(f"unknown rule {rule!r}")
    if rule == "fedavg":
        return SelectionSet(users=tuple(range(1, n + 1)), rule=rule)
    if not 1 <= m <= n:
        raise InvalidConfiguration(f"need 1 <= m <= {n}")
    order = np.lexsort((np.arange(n), scores))[:m]
    return SelectionSet(users=tuple(sorted(int(i) + 1 for i in order)), rule=rule)


def scores_to_csv(rows, path) -> None:
    """Export (round, rule, user, S, lambda, S_mod, selected) rows."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["round", "rule", "user", "S", "lambda", "S_mod", "selected"])
        for row in rows:
            writer.writerow(row)
