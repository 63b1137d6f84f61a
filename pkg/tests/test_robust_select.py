import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from forta.errors import DimensionMismatch, InvalidConfiguration
from forta.joint_localizer import FrequencyProfile
from forta.robust_select import (
    ConfidenceVector,
    DistanceMatrix,
    distances,
    krum_scores,
    modified_scores,
    select,
    soft_confidences,
)


def _diff_vectors(vectors):
    """Pairwise difference dict from per-user vectors (1-based users)."""
    n = len(vectors)
    return {(j, k): vectors[j - 1] - vectors[k - 1]
            for j in range(1, n + 1) for k in range(j + 1, n + 1)}


def _brute_force_scores(dist, byzantine_bound):
    """Independent oracle: enumerate candidate neighbor subsets directly."""
    n = dist.shape[0]
    n_neighbors = n - byzantine_bound - 2
    scores = []
    for i in range(n):
        others = [j for j in range(n) if j != i]
        best = min(sum(dist[i, j] for j in c)
                   for c in itertools.combinations(others, n_neighbors))
        scores.append(best)
    return np.array(scores)


# --- distances --------------------------------------------------------------

def test_distances_zero_and_unit():
    vecs = [np.zeros(4) for _ in range(5)]
    d = distances(_diff_vectors(vecs), 5).d
    assert np.all(d == 0)
    vecs[0] = np.array([1.0, 0, 0, 0])
    d = distances(_diff_vectors(vecs), 5).d
    assert d[0, 1] == d[1, 0] == 1.0


def test_distances_missing_pair():
    dv = _diff_vectors([np.zeros(2)] * 4)
    dv.pop((1, 2))
    with pytest.raises(InvalidConfiguration):
        distances(dv, 4)


def test_distance_matrix_must_be_square():
    with pytest.raises(DimensionMismatch):
        DistanceMatrix(np.zeros((3, 4)))


# --- Krum scores ------------------------------------------------------------

@settings(max_examples=40, deadline=None)
@given(st.integers(5, 7), st.integers(0, 2**32 - 1))
def test_krum_matches_brute_force(n, seed):
    rng = np.random.default_rng(seed)
    vecs = [rng.normal(size=6) for _ in range(n)]
    dist = distances(_diff_vectors(vecs), n)
    table = krum_scores(dist, byzantine_bound=1)
    oracle = _brute_force_scores(dist.d, byzantine_bound=1)
    assert np.allclose(table.scores, oracle, atol=1e-9)


def test_krum_neighbor_count_and_ties():
    # equidistant users: ties break toward the lower index
    n = 6
    d = np.ones((n, n)) - np.eye(n)
    table = krum_scores(DistanceMatrix(d), byzantine_bound=1)
    assert all(len(ns) == n - 1 - 2 for ns in table.neighbor_sets)
    assert table.neighbor_sets[5] == (1, 2, 3)


def test_krum_outlier_scores_high():
    rng = np.random.default_rng(0)
    vecs = [rng.normal(scale=0.1, size=8) for _ in range(9)] + \
           [np.full(8, 50.0)]
    dist = distances(_diff_vectors(vecs), 10)
    table = krum_scores(dist, byzantine_bound=2)
    assert np.argmax(table.scores) == 9


def test_krum_rejects_tiny_n():
    with pytest.raises(InvalidConfiguration):
        krum_scores(DistanceMatrix(np.zeros((4, 4))), byzantine_bound=2)


# --- confidences ------------------------------------------------------------

def test_uniform_counts_uniform_confidences():
    profile = FrequencyProfile(counts=np.zeros(10, dtype=int), total_codewords=50)
    conf = soft_confidences(profile)
    assert np.allclose(conf.lam, 0.1)


def test_flagged_user_gets_high_confidence():
    counts = np.zeros(10, dtype=int)
    counts[3] = 100
    profile = FrequencyProfile(counts=counts, total_codewords=100)
    conf = soft_confidences(profile, temperature=0.1)
    assert np.argmax(conf.lam) == 3
    assert conf.lam[3] > 0.99
    assert conf.lam.sum() == pytest.approx(1.0)


def test_temperature_must_be_positive():
    profile = FrequencyProfile(counts=np.zeros(5, dtype=int), total_codewords=1)
    with pytest.raises(InvalidConfiguration):
        soft_confidences(profile, temperature=0.0)


# --- modified scores --------------------------------------------------------

def test_modified_scores_formula():
    scores = np.array([4.0, 8.0, 12.0])
    lam = np.array([0.5, 0.25, 0.25])
    table = krum_scores(DistanceMatrix(np.zeros((3, 3)) + 1 - np.eye(3)), 0)
    table.scores = scores
    conf = ConfidenceVector(lam=lam, temperature=0.1)
    n, a = 3, 0
    s_min = scores.min() / (n - a - 2)
    expected = lam * scores + (1 - lam) * s_min
    got = modified_scores(table, conf, n_users=n, byzantine_bound=a)
    assert np.allclose(got, expected)


def test_modified_uniform_lam_preserves_order():
    rng = np.random.default_rng(1)
    vecs = [rng.normal(size=5) for _ in range(8)]
    dist = distances(_diff_vectors(vecs), 8)
    table = krum_scores(dist, byzantine_bound=2)
    conf = ConfidenceVector(lam=np.full(8, 1.0 / 8), temperature=0.1)
    mod = modified_scores(table, conf, 8, 2)
    assert np.array_equal(np.argsort(mod), np.argsort(table.scores))


def test_modified_scores_dimension_check():
    table = krum_scores(DistanceMatrix(np.zeros((5, 5))), 1)
    conf = ConfidenceVector(lam=np.full(4, 0.25), temperature=0.1)
    with pytest.raises(DimensionMismatch):
        modified_scores(table, conf, 5, 1)


# --- selection --------------------------------------------------------------

def test_select_smallest_scores():
    scores = np.array([5.0, 1.0, 3.0, 2.0, 4.0])
    assert select(scores, 3, rule="krum").users == (2, 3, 4)


def test_select_tie_breaks_low_index():
    assert select(np.zeros(5), 2, rule="krum").users == (1, 2)


def test_select_fedavg_takes_everyone():
    sel = select(np.arange(6, dtype=float), 2, rule="fedavg")
    assert sel.users == (1, 2, 3, 4, 5, 6)


def test_select_validates():
    with pytest.raises(InvalidConfiguration):
        select(np.zeros(4), 5, rule="krum")
    with pytest.raises(InvalidConfiguration):
        select(np.zeros(4), 2, rule="median")
