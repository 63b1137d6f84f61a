"""Analog secret sharing of real update vectors over the complex domain.

Each user masks its update with a degree-T polynomial whose coefficients are
circularly symmetric complex Gaussians, evaluates it at the n-th roots of
unity, and hands one evaluation (share) to every user.  Pairwise differences
of shares, collected from all holders, form codewords of the (N, T+1) DFT
code; the server decodes them to recover masked pairwise differences without
seeing any individual update.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from . import dft_codec
from .dft_codec import CodecParams, decode_batch
from .errors import DimensionMismatch, InvalidConfiguration, ProtocolViolation


@dataclass(frozen=True)
class SharingParams:
    """Protocol-level sharing configuration.

    privacy_sigma is the total masking standard deviation per coordinate
    (each of the T coefficient vectors gets variance privacy_sigma**2 / T).
    injected_precision_sigma adds a synthetic real Gaussian to the shared
    constant term, standing in for finite-precision noise; zero means only
    genuine float64 round-off is present.
    """

    n_users: int
    collusion_threshold: int
    privacy_sigma: float = 1.0
    injected_precision_sigma: float = 1e-7
    rng_seed: int = 0

    def __post_init__(self):
        if self.collusion_threshold < 1:
            raise InvalidConfiguration("collusion_threshold must be >= 1")
        if self.n_users <= self.collusion_threshold + 1:
            raise InvalidConfiguration("need n_users > collusion_threshold + 1")
        if self.privacy_sigma <= 0:
            raise InvalidConfiguration("privacy_sigma must be positive")
        if self.injected_precision_sigma < 0:
            raise InvalidConfiguration("injected_precision_sigma must be >= 0")

    @property
    def message_length(self) -> int:
        return self.collusion_threshold + 1


@dataclass(frozen=True)
class Share:
    """Evaluation of owner's sharing polynomial at holder's root of unity."""

    owner: int
    holder: int
    payload: np.ndarray


@dataclass(frozen=True)
class DifferenceMessage:
    """s_{j,reporter} - s_{k,reporter} for the ordered pair (j, k), j < k."""

    reporter: int
    pair: tuple
    payload: np.ndarray


@dataclass
class ReconstructionReport:
    """Per-coordinate decode outcome for one reconstructed secret vector."""

    secret: np.ndarray
    per_coordinate_error_positions: list
    decode_failures: int
    total_codewords: int
    position_energies: np.ndarray  # (d, n) solved |error| per coordinate
    max_imag_residue: float


def _coefficient_rng(params: SharingParams, owner: int) -> np.random.Generator:
    return np.random.default_rng([params.rng_seed, owner])


def make_shares(update, params: SharingParams, owner: int) -> list:
    """Generate one share of `update` for every user (including the owner).

    Per coordinate, the n payload entries form an exact codeword of the
    (n_users, T+1) DFT code for the message (w + eps, r_1, ..., r_T).
    Deterministic given (rng_seed, owner).
    """
    update = np.asarray(update, dtype=float)
    if update.ndim != 1 or update.size < 1:
        raise DimensionMismatch("update must be a nonempty 1-D real vector")
    if not 1 <= owner <= params.n_users:
        raise InvalidConfiguration(f"owner index {owner} out of range")
    d = update.size
    t = params.collusion_threshold
    rng = _coefficient_rng(params, owner)
    coeff_std = params.privacy_sigma / np.sqrt(2.0 * t)
    coeffs = (rng.normal(size=(t, d)) + 1j * rng.normal(size=(t, d))) * coeff_std
    eps = np.zeros(d)
    if params.injected_precision_sigma > 0:
        eps = rng.normal(scale=params.injected_precision_sigma, size=d)
    message = np.vstack([(update + eps).astype(complex), coeffs])  # (T+1, d)
    encode_m, _, _ = dft_codec._matrices(params.n_users, params.message_length)
    payloads = encode_m @ message  # (n, d)
    return [Share(owner=owner, holder=j + 1, payload=payloads[j])
            for j in range(params.n_users)]


def _shares_by_owner(held_shares, n_users: int) -> dict:
    by_owner = {}
    holders = set()
    for share in held_shares:
        if share.owner in by_owner:
            raise ProtocolViolation(f"duplicate share from owner {share.owner}")
        by_owner[share.owner] = share.payload
        holders.add(share.holder)
    missing = set(range(1, n_users + 1)) - set(by_owner)
    if missing:
        raise ProtocolViolation(f"missing shares from owners {sorted(missing)}")
    if len(holders) != 1:
        raise ProtocolViolation("held shares must all belong to one holder")
    return by_owner


def difference_messages(held_shares, n_users: int) -> list:
    """Pairwise share differences computed at one holder.

    Emits one message per unordered pair j < k with payload s_j - s_k; only
    differences of masked shares leave the holder.
    """
    held_shares = list(held_shares)
    by_owner = _shares_by_owner(held_shares, n_users)
    holder = held_shares[0].holder
    stacked = np.stack([by_owner[i] for i in range(1, n_users + 1)])
    j_idx, k_idx = np.triu_indices(n_users, k=1)
    diffs = stacked[j_idx] - stacked[k_idx]
    return [DifferenceMessage(reporter=holder, pair=(int(j) + 1, int(k) + 1), payload=p)
            for j, k, p in zip(j_idx, k_idx, diffs)]


def assemble_codewords(messages, n_users: int) -> np.ndarray:
    """Stack one pair's messages from all reporters into d codewords.

    Returns a (d, n_users) array whose row l is the length-N codeword for
    coordinate l (reporter i's payload in column i-1).
    """
    seen = {}
    pairs = set()
    for msg in messages:
        if msg.reporter in seen:
            raise ProtocolViolation(f"duplicate message from reporter {msg.reporter}")
        seen[msg.reporter] = msg.payload
        pairs.add(msg.pair)
    missing = set(range(1, n_users + 1)) - set(seen)
    if missing:
        raise ProtocolViolation(f"missing messages from reporters {sorted(missing)}")
    if len(pairs) != 1:
        raise ProtocolViolation(f"messages mix pairs {sorted(pairs)}")
    return np.stack([seen[i] for i in range(1, n_users + 1)], axis=1)


def reconstruct(codewords: np.ndarray, codec: CodecParams,
                hints=None) -> ReconstructionReport:
    """Decode each coordinate independently and collect the evidence.

    Never raises on decode trouble: unreliable coordinates keep their partial
    value and are counted in decode_failures.
    """
    codewords = np.asarray(codewords, dtype=complex)
    if codewords.ndim != 2 or codewords.shape[1] != codec.n:
        raise DimensionMismatch(f"expected (d, {codec.n}) codeword matrix")
    results = decode_batch(codewords, codec, erasure_hints=hints)
    secret = np.array([r.message[0].real for r in results])
    imag = max(abs(r.message[0].imag) for r in results)
    return ReconstructionReport(
        secret=secret,
        per_coordinate_error_positions=[set(r.error_positions) for r in results],
        decode_failures=sum(not r.reliable for r in results),
        total_codewords=len(results),
        position_energies=np.stack([r.position_energies for r in results]),
        max_imag_residue=float(imag),
    )


def aggregation_message(held_shares, selected, n_users: int) -> np.ndarray:
    """Sum of this holder's shares from the selected owners."""
    users = tuple(selected.users) if hasattr(selected, "users") else tuple(selected)
    if not users:
        raise ProtocolViolation("selected set is empty")
    by_owner = _shares_by_owner(held_shares, n_users)
    return np.sum([by_owner[u] for u in users], axis=0)


def dump_shares_csv(shares, path, round_idx: int = 0) -> None:
    """Debug export: one row per (share, coordinate)."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["round", "owner", "holder", "coordinate", "re", "im"])
        for share in shares:
            for coord, z in enumerate(share.payload):
                writer.writerow([round_idx, share.owner, share.holder, coord,
                                 repr(float(z.real)), repr(float(z.imag))])
