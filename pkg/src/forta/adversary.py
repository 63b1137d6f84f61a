"""Byzantine attack models: update poisoning, share corruption, and a
precision-mimicking attack calibrated just below the decoder's detection
threshold.

Honest users are never touched: every operation is the identity for users
outside the Byzantine set.  All randomness is derived from the attack seed.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .analog_sharing import DifferenceMessage
from .dft_codec import CodecParams, _hankel, syndromes
from .errors import InvalidConfiguration

KINDS = ("none", "scale", "additive_noise", "share_corrupt", "precision_mimic", "combined")


@dataclass(frozen=True)
class AttackSpec:
    kind: str = "none"
    magnitude: float = 0.0
    byzantine_set: tuple = ()
    collusion_set: tuple = ()
    rng_seed: int = 0
    mimic_margin: float = 0.9  # safety factor below the detection threshold

    def __post_init__(self):
        if self.kind not in KINDS:
            raise InvalidConfiguration(f"unknown attack kind {self.kind!r}")
        if self.magnitude < 0:
            raise InvalidConfiguration("magnitude must be nonnegative")
        object.__setattr__(self, "byzantine_set", tuple(sorted(set(self.byzantine_set))))
        object.__setattr__(self, "collusion_set", tuple(sorted(set(self.collusion_set))))

    def is_byzantine(self, user: int) -> bool:
        return user in self.byzantine_set


def validate_threat(spec: AttackSpec, byzantine_bound: int, collusion_bound: int) -> None:
    """Reject configurations outside the declared threat model."""
    if len(spec.byzantine_set) > byzantine_bound:
        raise InvalidConfiguration(
            f"{len(spec.byzantine_set)} Byzantine users exceed the bound A={byzantine_bound}")
    if len(spec.collusion_set) > collusion_bound:
        raise InvalidConfiguration(
            f"{len(spec.collusion_set)} colluding users exceed the bound T={collusion_bound}")


@dataclass(frozen=True)
class MimicPlan:
    """Calibrated per-coordinate perturbation for the precision-mimic attack.

    per_coordinate[l] is the complex value every Byzantine reporter adds to
    coordinate l of its difference messages for honest-honest pairs; all
    entries share a common phase (real, signed) so the induced decoding bias
    adds coherently across reporters and codewords.  The net effect inflates
    every honest-honest distance by roughly ||bias||**2 while pairs involving
    an attacker stay clean, which drags honest users' Krum scores above the
    attackers'.  poison is a model-poisoning shift small enough
    (||poison|| = ||bias|| / 2) for the inflation to keep hiding it.
    """

    per_coordinate: np.ndarray
    poison: np.ndarray
    per_coordinate_magnitude: float
    bias_norm: float


def mimic_threshold(codec: CodecParams, byzantine_set) -> float:
    """Largest per-position magnitude that keeps the syndrome Hankel matrix's
    leading singular value at the decoder's noise floor.

    The syndromes are linear in the corruption, so the threshold is exact:
    noise_floor / sigma_1(unit-magnitude pattern).
    """
    if not byzantine_set:
        raise InvalidConfiguration("byzantine_set is empty")
    unit = np.zeros(codec.n, dtype=complex)
    unit[np.asarray(sorted(byzantine_set)) - 1] = 1.0
    s1 = np.linalg.svd(_hankel(syndromes(unit, codec)), compute_uv=False)[0]
    return codec.noise_floor / s1


def plan_precision_mimic(spec: AttackSpec, codec: CodecParams, d: int) -> MimicPlan:
    """Calibrate the sub-threshold perturbation and a poison it can hide."""
    c_max = mimic_threshold(codec, spec.byzantine_set)
    mag = spec.magnitude * spec.mimic_margin * c_max
    rng = np.random.default_rng([spec.rng_seed, 7])
    signs = rng.choice([-1.0, 1.0], size=d)
    per_coord = (mag * signs).astype(complex)
    n_byz = len(spec.byzantine_set)
    bias_norm = n_byz / codec.n * mag * np.sqrt(d)
    poison_dir = rng.choice([-1.0, 1.0], size=d) / np.sqrt(d)
    poison = 0.5 * bias_norm * poison_dir
    return MimicPlan(per_coordinate=per_coord, poison=poison,
                     per_coordinate_magnitude=mag, bias_norm=bias_norm)


def poison_update(update, spec: AttackSpec, user: int,
                  plan: MimicPlan = None) -> np.ndarray:
    """Model-poisoning transformation of one user's local update."""
    update = np.asarray(update, dtype=float)
    if not spec.is_byzantine(user):
        return update
    if spec.kind == "scale":
        return spec.magnitude * update
    if spec.kind == "additive_noise":
        rng = np.random.default_rng([spec.rng_seed, user])
        return update + rng.normal(scale=spec.magnitude, size=update.shape) \
            if spec.magnitude > 0 else update
    if spec.kind in ("precision_mimic", "combined") and plan is not None:
        return update + plan.poison
    return update


def corrupt_messages(messages, spec: AttackSpec, round_idx: int = 0) -> list:
    """Additive complex-Gaussian corruption of a Byzantine reporter's messages."""
    messages = list(messages)
    if not messages:
        return messages
    reporter = messages[0].reporter
    if not spec.is_byzantine(reporter):
        return messages
    if spec.kind not in ("share_corrupt", "combined") or spec.magnitude == 0:
        return messages
    rng = np.random.default_rng([spec.rng_seed, round_idx, reporter])
    out = []
    for msg in messages:
        d = msg.payload.shape[0]
        noise = (rng.normal(size=d) + 1j * rng.normal(size=d)) * (spec.magnitude / np.sqrt(2))
        out.append(DifferenceMessage(reporter=msg.reporter, pair=msg.pair,
                                     payload=msg.payload + noise))
    return out


def precision_mimic(messages, spec: AttackSpec, codec: CodecParams,
                    plan: MimicPlan = None) -> list:
    """Add the calibrated common-phase perturbation to every outgoing message."""
    messages = list(messages)
    if not messages:
        return messages
    reporter = messages[0].reporter
    if not spec.is_byzantine(reporter):
        return messages
    if spec.kind not in ("precision_mimic", "combined") or spec.magnitude == 0:
        return messages
    if plan is None:
        plan = plan_precision_mimic(spec, codec, messages[0].payload.shape[0])
    byz = set(spec.byzantine_set)
    return [m if (m.pair[0] in byz or m.pair[1] in byz)
            else DifferenceMessage(reporter=m.reporter, pair=m.pair,
                                   payload=m.payload + plan.per_coordinate)
            for m in messages]
