"""Analog (n, k) DFT code over the complex numbers.

A message of length k is the coefficient vector of a polynomial of degree
< k; the codeword is its evaluation at the n-th roots of unity
omega_i = exp(2*pi*1j*i/n) for i = 1..n.  Decoding is Prony-style: syndrome
computation, Hankel-SVD rank estimation of the error count, linear-prediction
error location, and a Vandermonde least-squares solve for error magnitudes.
Positions are 1-based throughout (position n corresponds to omega_n = 1).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .errors import (
    DecodeUnreliable,
    DimensionMismatch,
    InvalidConfiguration,
    LocalizationFailure,
)


@dataclass(frozen=True)
class CodecParams:
    """Code geometry plus the numerical thresholds the decoder needs.

    rank_tolerance   singular-value ratio above which a Hankel direction
                     counts as a genuine error mode
    root_match_tolerance   max angular distance when snapping locator roots
                     to roots of unity (default: half the angular spacing)
    noise_floor      absolute syndrome energy below which a word is treated
                     as clean
    evidence_floor   absolute syndrome energy above which sub-detection
                     residuals are still profiled into position_energies
                     (diagnostic input for joint localization)
    """

    n: int
    k: int
    rank_tolerance: float = 1e-4
    root_match_tolerance: float = None  # resolved to pi/n in __post_init__
    noise_floor: float = 1e-9
    evidence_floor: float = 1e-12

    def __post_init__(self):
        if not (self.n > self.k >= 1):
            raise InvalidConfiguration(f"need n > k >= 1, got n={self.n}, k={self.k}")
        if not (0.0 < self.rank_tolerance < 1.0):
            raise InvalidConfiguration("rank_tolerance must be in (0, 1)")
        if self.root_match_tolerance is None:
            object.__setattr__(self, "root_match_tolerance", np.pi / self.n)
        if self.root_match_tolerance <= 0.0:
            raise InvalidConfiguration("root_match_tolerance must be positive")
        if self.noise_floor < 0.0:
            raise InvalidConfiguration("noise_floor must be nonnegative")

    @property
    def nu_max(self) -> int:
        """Maximum number of correctable (unhinted) errors."""
        return (self.n - self.k) // 2

    @property
    def n_syndromes(self) -> int:
        return self.n - self.k


@dataclass(frozen=True)
class Codeword:
    """Evaluations of a message polynomial at the n-th roots of unity."""

    values: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "values", np.asarray(self.values, dtype=complex))
        if not np.all(np.isfinite(self.values)):
            raise DimensionMismatch("codeword entries must be finite")


@dataclass
class DecodeResult:
    """Decoded message plus the error evidence the joint localizer consumes.

    position_energies holds an estimated error magnitude for every position;
    for positions outside error_positions it is either zero or a sub-floor
    diagnostic estimate of residual syndrome energy.
    """

    message: np.ndarray
    error_positions: tuple
    error_values: np.ndarray
    position_energies: np.ndarray
    residual: float
    reliable: bool = True


@lru_cache(maxsize=32)
def _matrices(n: int, k: int):
    """Encode, syndrome and interpolation matrices for an (n, k) code."""
    i = np.arange(1, n + 1)[:, None]
    t = np.arange(k)[None, :]
    f = (k + np.arange(n - k))[None, :]
    encode_m = np.exp(2j * np.pi * i * t / n)          # (n, k): word = E @ msg
    synd_m = np.exp(-2j * np.pi * i * f / n) / n       # (n, L): synd = word @ S
    interp_m = np.exp(-2j * np.pi * i * t / n) / n     # (n, k): msg = word @ M
    return encode_m, synd_m, interp_m


def roots_of_unity(n: int) -> np.ndarray:
    """omega_1..omega_n with omega_i = exp(2*pi*1j*i/n)."""
    return np.exp(2j * np.pi * np.arange(1, n + 1) / n)


def encode(message, params: CodecParams) -> Codeword:
    """Evaluate the message polynomial at the n-th roots of unity."""
    message = np.asarray(message, dtype=complex)
    if message.shape != (params.k,):
        raise DimensionMismatch(f"message must have length {params.k}, got {message.shape}")
    encode_m, _, _ = _matrices(params.n, params.k)
    return Codeword(encode_m @ message)


def syndromes(received, params: CodecParams) -> np.ndarray:
    """DFT spectrum of the received word at the n-k parity frequencies.

    Zero (up to round-off) for any clean codeword; linear in the input.
    """
    values = received.values if isinstance(received, Codeword) else np.asarray(received, dtype=complex)
    if values.shape[-1] != params.n:
        raise DimensionMismatch(f"received word must have length {params.n}")
    _, synd_m, _ = _matrices(params.n, params.k)
    return values @ synd_m


def _hankel(s: np.ndarray) -> np.ndarray:
    """Maximal square-ish Hankel matrix of the syndrome sequence."""
    ln = len(s)
    rows = (ln + 1) // 2
    cols = ln - rows + 1
    return s[np.arange(rows)[:, None] + np.arange(cols)[None, :]]


def _count_from_singulars(sv: np.ndarray, params: CodecParams) -> int:
    """Largest nu <= nu_max with sigma_nu / sigma_1 above rank_tolerance."""
    if sv[0] == 0.0:
        return 0
    ratios = sv / sv[0]
    count = int(np.sum(ratios > params.rank_tolerance))
    return min(count, params.nu_max)


def estimate_error_count(synd: np.ndarray, params: CodecParams) -> int:
    """Numerical-rank estimate of the syndrome Hankel matrix.

    Returns 0 when the leading singular value is at or below the noise floor.
    """
    synd = np.asarray(synd, dtype=complex)
    if len(synd) < 2:
        raise DimensionMismatch("need at least 2 syndromes")
    sv = np.linalg.svd(_hankel(synd), compute_uv=False)
    if sv[0] <= params.noise_floor:
        return 0
    return _count_from_singulars(sv, params)


def _snap_root(root: complex, params: CodecParams, best_effort: bool):
    """Match a locator root exp(-2*pi*1j*p/n) to position p (1-based)."""
    n = params.n
    ang = np.angle(root)
    p = int(round(-ang * n / (2.0 * np.pi))) % n
    pos = n if p == 0 else p
    # angular residual after rotating the snapped position back to 1
    resid = abs(np.angle(root * np.exp(2j * np.pi * p / n)))
    if resid > params.root_match_tolerance:
        if best_effort:
            return None
        raise LocalizationFailure(root)
    return pos


def locate_errors(synd: np.ndarray, count: int, params: CodecParams,
                  best_effort: bool = False) -> tuple:
    """Recover error positions from the syndromes via linear prediction.

    Solves the Toeplitz least-squares system for the degree-``count`` error
    locator, finds its roots and snaps each to the nearest root of unity.
    With ``best_effort`` unmatched roots are dropped instead of raising.
    """
    synd = np.asarray(synd, dtype=complex)
    ln = len(synd)
    if not (1 <= count <= params.nu_max):
        raise InvalidConfiguration(f"count must be in [1, {params.nu_max}]")
    rows = ln - count
    a = synd[np.arange(rows)[:, None] + np.arange(count)[None, :]]
    b = -synd[count:]
    coef, *_ = np.linalg.lstsq(a, b, rcond=None)
    poly = np.concatenate(([1.0 + 0j], coef[::-1]))
    roots = np.roots(poly)
    positions = set()
    for root in roots:
        pos = _snap_root(root, params, best_effort)
        if pos is not None:
            positions.add(pos)
    return tuple(sorted(positions))


def _magnitude_matrix(positions, params: CodecParams) -> np.ndarray:
    """Columns are the syndrome signatures of unit impulses at the positions."""
    ln = params.n_syndromes
    p = np.asarray(positions)[None, :]
    j = np.arange(ln)[:, None]
    return np.exp(-2j * np.pi * p * (params.k + j) / params.n) / params.n


def solve_error_values(synd: np.ndarray, positions, params: CodecParams) -> np.ndarray:
    """Least-squares error magnitudes at the given positions."""
    if len(positions) == 0:
        return np.zeros(0, dtype=complex)
    m = _magnitude_matrix(positions, params)
    values, *_ = np.linalg.lstsq(m, np.asarray(synd, dtype=complex), rcond=None)
    return values


def _erasure_filter(synd: np.ndarray, hinted, params: CodecParams) -> np.ndarray:
    """Annihilate the hinted positions' syndrome modes.

    Convolving the syndrome sequence with the coefficients of the erasure
    locator prod_{p in hinted} (z - omega_p^{-1}) leaves a shorter sequence
    carrying only the unhinted error modes.
    """
    gamma = np.array([1.0 + 0j])
    for p in hinted:
        z = np.exp(-2j * np.pi * p / params.n)
        gamma = np.convolve(gamma, np.array([-z, 1.0 + 0j]))  # ascending coeffs
    ln = len(synd)
    deg = len(hinted)
    out_len = ln - deg
    if out_len <= 0:
        return np.zeros(0, dtype=complex)
    j = np.arange(out_len)[:, None] + np.arange(deg + 1)[None, :]
    return synd[j] @ gamma


def _error_vector(positions, values, n: int) -> np.ndarray:
    e = np.zeros(n, dtype=complex)
    for p, v in zip(positions, values):
        e[p - 1] += v
    return e


def _ghost_energies(synd: np.ndarray, sv: np.ndarray, params: CodecParams) -> np.ndarray:
    """Best-effort sub-floor energy estimate for joint localization.

    Runs the locator at the numerical rank of the syndrome Hankel matrix even
    though the count estimate gated to zero, and records solved magnitudes as
    diagnostic energies.  Never affects the decoded message.
    """
    energies = np.zeros(params.n)
    count = _count_from_singulars(sv, params)
    if count == 0:
        return energies
    try:
        positions = locate_errors(synd, count, params, best_effort=True)
    except np.linalg.LinAlgError:
        return energies
    if positions:
        values = solve_error_values(synd, positions, params)
        energies[np.asarray(positions) - 1] = np.abs(values)
    return energies


def _assemble(values_in, synd, positions, params: CodecParams):
    """Magnitude solve at candidate positions, correction and re-encode check."""
    energies = np.zeros(params.n)
    if positions:
        err_values = solve_error_values(synd, positions, params)
        energies[np.asarray(positions) - 1] = np.abs(err_values)
        # drop candidates whose solved magnitude is indistinguishable from noise
        keep = np.abs(err_values) > params.noise_floor
        positions = tuple(p for p, k_ in zip(positions, keep) if k_)
        err_values = err_values[keep]
    else:
        err_values = np.zeros(0, dtype=complex)
    err_vec = _error_vector(positions, err_values, params.n)
    encode_m, _, interp_m = _matrices(params.n, params.k)
    message = (values_in - err_vec) @ interp_m
    residual = float(np.linalg.norm(encode_m @ message + err_vec - values_in))
    return DecodeResult(message=message, error_positions=positions,
                        error_values=err_values, position_energies=energies,
                        residual=residual)


def decode(received, params: CodecParams, erasure_hints=None) -> DecodeResult:
    """Full Prony-style decoding pipeline with optional erasure hints.

    Hinted positions are unconditionally included as error candidates before
    the magnitude solve; each consumes one unit of correction budget (versus
    two for an unknown error).  When the re-encode residual rejects an
    attempt, the error count is retried up to capacity before giving up.
    Raises DecodeUnreliable (carrying the partial result) when no attempt is
    trustworthy.
    """
    values_in = received.values if isinstance(received, Codeword) else np.asarray(received, dtype=complex)
    if values_in.shape != (params.n,):
        raise DimensionMismatch(f"received word must have length {params.n}")
    if erasure_hints is not None and len(set(erasure_hints)) > params.n_syndromes:
        raise InvalidConfiguration("more erasure hints than parity symbols")

    synd = syndromes(values_in, params)
    sv = np.linalg.svd(_hankel(synd), compute_uv=False)
    scale = float(np.linalg.norm(values_in))
    threshold = 1e3 * params.noise_floor * max(scale, 1e-300)

    hinted = tuple(sorted(set(int(p) for p in erasure_hints))) if erasure_hints else ()
    if hinted:
        filtered = _erasure_filter(synd, hinted, params)
        cap = min((params.n_syndromes - len(hinted)) // 2, max(len(filtered) - 1, 0))
        if len(filtered) >= 2 and np.linalg.norm(filtered) > 0:
            fsv = np.linalg.svd(_hankel(filtered), compute_uv=False)
            est = 0 if fsv[0] <= params.noise_floor else min(
                _count_from_singulars(fsv, params), cap)
        else:
            est = 0
        locator_synd = filtered
    else:
        cap = params.nu_max
        est = 0 if sv[0] <= params.noise_floor else _count_from_singulars(sv, params)
        locator_synd = synd

    best = None
    for count in range(est, cap + 1):
        if count > 0:
            try:
                extra = locate_errors(locator_synd, count, params,
                                      best_effort=bool(hinted) or count > est)
            except LocalizationFailure:
                if best is None and count == est:
                    raise
                continue
        else:
            extra = ()
        positions = tuple(sorted(set(hinted) | set(extra)))
        result = _assemble(values_in, synd, positions, params)
        if best is None or result.residual < best.residual:
            best = result
        if best.residual <= threshold:
            break

    if not best.error_positions and sv[0] > params.evidence_floor:
        best.position_energies = _ghost_energies(synd, sv, params)

    if best.residual > threshold:
        best.reliable = False
        raise DecodeUnreliable(best)
    return best


def decode_batch(words: np.ndarray, params: CodecParams, erasure_hints=None) -> list:
    """Decode many length-n words sharing one set of erasure hints.

    Vectorizes the syndrome computation and takes a fast path for words whose
    syndromes are provably below both the noise and evidence floors.  Words
    whose decode is unreliable are returned with ``reliable=False`` instead of
    raising.
    """
    words = np.asarray(words, dtype=complex)
    if words.ndim != 2 or words.shape[1] != params.n:
        raise DimensionMismatch(f"expected (m, {params.n}) array, got {words.shape}")
    encode_m, synd_m, interp_m = _matrices(params.n, params.k)
    synd_all = words @ synd_m
    ln = params.n_syndromes
    rows = (ln + 1) // 2
    # |sigma_1| <= ||H||_F <= sqrt(rows*cols) * max|s|
    frob_factor = np.sqrt(rows * (ln - rows + 1))
    clean_thresh = min(params.noise_floor, params.evidence_floor) / frob_factor
    clean = np.max(np.abs(synd_all), axis=1) <= clean_thresh

    results = [None] * len(words)
    if np.any(clean):
        msgs = words[clean] @ interp_m
        resid = np.linalg.norm(msgs @ encode_m.T - words[clean], axis=1)
        zero_e = np.zeros(params.n)
        for idx, msg, r in zip(np.nonzero(clean)[0], msgs, resid):
            results[idx] = DecodeResult(message=msg, error_positions=(),
                                        error_values=np.zeros(0, dtype=complex),
                                        position_energies=zero_e, residual=float(r))
    for idx in np.nonzero(~clean)[0]:
        try:
            results[idx] = decode(words[idx], params, erasure_hints=erasure_hints)
        except (DecodeUnreliable, LocalizationFailure) as exc:
            if isinstance(exc, DecodeUnreliable):
                results[idx] = exc.result
            else:
                # unmatched locator root: keep the uncorrected interpolation
                msg = words[idx] @ interp_m
                r = float(np.linalg.norm(encode_m @ msg - words[idx]))
                results[idx] = DecodeResult(message=msg, error_positions=(),
                                            error_values=np.zeros(0, dtype=complex),
                                            position_energies=np.zeros(params.n),
                                            residual=r, reliable=False)
    return results
