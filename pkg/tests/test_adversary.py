import numpy as np
import pytest

from forta.adversary import (
    AttackSpec,
    corrupt_messages,
    mimic_threshold,
    plan_precision_mimic,
    poison_update,
    precision_mimic,
    validate_threat,
)
from forta.analog_sharing import (
    DifferenceMessage,
    SharingParams,
    assemble_codewords,
    difference_messages,
    make_shares,
    reconstruct,
)
from forta.dft_codec import CodecParams, _hankel, estimate_error_count, syndromes
from forta.errors import InvalidConfiguration

N, T = 30, 9
CODEC = CodecParams(N, T + 1)
BYZ = tuple(range(1, 11))


def test_spec_validation():
    with pytest.raises(InvalidConfiguration):
        AttackSpec(kind="meteor")
    with pytest.raises(InvalidConfiguration):
        AttackSpec(kind="scale", magnitude=-1.0)
    spec = AttackSpec(kind="scale", magnitude=2.0, byzantine_set=(3, 1, 3))
    assert spec.byzantine_set == (1, 3)
    assert spec.is_byzantine(3) and not spec.is_byzantine(2)


def test_threat_bounds():
    spec = AttackSpec(kind="scale", magnitude=1.0, byzantine_set=BYZ)
    validate_threat(spec, byzantine_bound=10, collusion_bound=9)
    with pytest.raises(InvalidConfiguration):
        validate_threat(spec, byzantine_bound=9, collusion_bound=9)


# --- update poisoning -------------------------------------------------------

def test_scale_poison():
    spec = AttackSpec(kind="scale", magnitude=10.0, byzantine_set=(1,))
    u = np.array([1.0, -2.0, 0.5])
    assert np.allclose(poison_update(u, spec, 1), 10.0 * u)
    assert np.allclose(poison_update(u, spec, 2), u)  # honest untouched


def test_none_and_degenerate_noise_are_identity():
    u = np.arange(4.0)
    assert np.allclose(poison_update(u, AttackSpec(), 1), u)
    spec = AttackSpec(kind="additive_noise", magnitude=0.0, byzantine_set=(1,))
    assert np.allclose(poison_update(u, spec, 1), u)


def test_additive_noise_statistics():
    spec = AttackSpec(kind="additive_noise", magnitude=2.0, byzantine_set=(1,),
                      rng_seed=3)
    u = np.zeros(20000)
    out = poison_update(u, spec, 1)
    assert np.std(out) == pytest.approx(2.0, rel=0.05)
    # deterministic under a fixed seed
    assert np.array_equal(out, poison_update(u, spec, 1))


# --- share corruption -------------------------------------------------------

def _honest_messages(rng, d=8, holder=1):
    updates = [rng.normal(size=d) for _ in range(N)]
    params = SharingParams(N, T, injected_precision_sigma=0.0, rng_seed=5)
    shares = {o: make_shares(updates[o - 1], params, o) for o in range(1, N + 1)}
    held = [shares[o][holder - 1] for o in range(1, N + 1)]
    return difference_messages(held, N), updates, shares


def test_corrupt_messages_localizable():
    rng = np.random.default_rng(0)
    msgs, updates, shares = _honest_messages(rng, holder=4)
    spec = AttackSpec(kind="share_corrupt", magnitude=1.0, byzantine_set=(4,))
    out = corrupt_messages(msgs, spec)
    # collect messages for one pair from every holder, with holder 4 corrupt
    pair = out[0].pair
    collected = [m for m in out if m.pair == pair]
    for holder in range(1, N + 1):
        if holder == 4:
            continue
        held = [shares[o][holder - 1] for o in range(1, N + 1)]
        for m in difference_messages(held, N):
            if m.pair == pair:
                collected.append(m)
    words = assemble_codewords(collected, N)
    report = reconstruct(words, CODEC)
    flagged = [4 in s for s in report.per_coordinate_error_positions]
    assert np.mean(flagged) >= 0.99
    truth = updates[pair[0] - 1] - updates[pair[1] - 1]
    assert np.linalg.norm(report.secret - truth) <= 1e-5 * np.linalg.norm(truth)


def test_corrupt_messages_identity_cases():
    rng = np.random.default_rng(1)
    msgs, _, _ = _honest_messages(rng, holder=2)
    spec = AttackSpec(kind="share_corrupt", magnitude=0.0, byzantine_set=(2,))
    out = corrupt_messages(msgs, spec)
    assert all(np.array_equal(a.payload, b.payload) for a, b in zip(msgs, out))
    spec = AttackSpec(kind="share_corrupt", magnitude=1.0, byzantine_set=(9,))
    out = corrupt_messages(msgs, spec)  # reporter 2 is honest
    assert all(np.array_equal(a.payload, b.payload) for a, b in zip(msgs, out))


# --- precision mimic --------------------------------------------------------

def test_mimic_threshold_is_exact():
    # the syndrome map is linear, so the calibrated magnitude lands the
    # Hankel leading singular value exactly on the noise floor
    c_max = mimic_threshold(CODEC, BYZ)
    word = np.zeros(N, dtype=complex)
    word[np.asarray(BYZ) - 1] = c_max
    s1 = np.linalg.svd(_hankel(syndromes(word, CODEC)), compute_uv=False)[0]
    assert s1 == pytest.approx(CODEC.noise_floor, rel=1e-9)
    # with the safety margin applied the pattern is invisible to the counter
    word_margin = np.zeros(N, dtype=complex)
    word_margin[np.asarray(BYZ) - 1] = 0.9 * c_max
    assert estimate_error_count(syndromes(word_margin, CODEC), CODEC) == 0


def test_mimic_plan_calibration():
    spec = AttackSpec(kind="precision_mimic", magnitude=1.0, byzantine_set=BYZ,
                      rng_seed=11, mimic_margin=0.9)
    plan = plan_precision_mimic(spec, CODEC, d=68)
    c_max = mimic_threshold(CODEC, BYZ)
    assert plan.per_coordinate_magnitude == pytest.approx(0.9 * c_max)
    assert np.all(np.abs(plan.per_coordinate) == pytest.approx(plan.per_coordinate_magnitude))
    # all perturbations share a common phase (real, signed)
    assert np.all(plan.per_coordinate.imag == 0)
    assert np.linalg.norm(plan.poison) == pytest.approx(0.5 * plan.bias_norm)


def test_mimic_evades_count_estimate():
    rng = np.random.default_rng(2)
    spec = AttackSpec(kind="precision_mimic", magnitude=1.0, byzantine_set=BYZ,
                      rng_seed=2)
    plan = plan_precision_mimic(spec, CODEC, d=8)
    msgs, _, shares = _honest_messages(rng, d=8, holder=1)
    collected = {}
    for holder in range(1, N + 1):
        held = [shares[o][holder - 1] for o in range(1, N + 1)]
        out = precision_mimic(difference_messages(held, N), spec, CODEC, plan=plan)
        for m in out:
            collected.setdefault(m.pair, []).append(m)
    words = assemble_codewords(collected[(11, 12)], N)  # honest-honest pair
    for row in words:
        assert estimate_error_count(syndromes(row, CODEC), CODEC) == 0


def test_mimic_spares_attacker_pairs():
    rng = np.random.default_rng(3)
    msgs, _, _ = _honest_messages(rng, holder=1)  # reporter 1 is Byzantine
    spec = AttackSpec(kind="precision_mimic", magnitude=1.0, byzantine_set=BYZ,
                      rng_seed=4)
    plan = plan_precision_mimic(spec, CODEC, d=8)
    out = precision_mimic(msgs, spec, CODEC, plan=plan)
    byz = set(BYZ)
    for before, after in zip(msgs, out):
        involves_byz = before.pair[0] in byz or before.pair[1] in byz
        changed = not np.array_equal(before.payload, after.payload)
        assert changed == (not involves_byz)


def test_mimic_zero_magnitude_identity():
    rng = np.random.default_rng(4)
    msgs, _, _ = _honest_messages(rng, holder=1)
    spec = AttackSpec(kind="precision_mimic", magnitude=0.0, byzantine_set=BYZ)
    out = precision_mimic(msgs, spec, CODEC)
    assert all(np.array_equal(a.payload, b.payload) for a, b in zip(msgs, out))


def test_mimic_bias_accumulates_over_coordinates():
    # per-coordinate the perturbation hides under the noise floor, but the
    # decoded-distance bias over d coordinates is far above honest round-off
    d = 68
    spec = AttackSpec(kind="precision_mimic", magnitude=1.0, byzantine_set=BYZ,
                      rng_seed=6)
    plan = plan_precision_mimic(spec, CODEC, d=d)
    # decoded constant-term bias per coordinate: mean of the perturbation
    # over the n evaluation positions, times the number of perturbing users
    per_coord_bias = len(BYZ) / N * plan.per_coordinate_magnitude
    total_bias = per_coord_bias * np.sqrt(d)
    assert total_bias == pytest.approx(plan.bias_norm)
    honest_roundoff = 1e-13 * np.sqrt(d)
    assert total_bias >= 10 * honest_roundoff
