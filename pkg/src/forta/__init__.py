"""Byzantine-resilient secure aggregation over analog secret sharing.

Modules: dft_codec (analog DFT encode/decode), analog_sharing (shares and
pairwise-difference exchange), joint_localizer (GMM pooling of decode
evidence), robust_select (Krum variants), adversary (attack models),
theory (resilience-bound evaluators), harness (federated round loop),
config/cli/plots (operational surface).
"""

from .adversary import AttackSpec
from .analog_sharing import SharingParams
from .dft_codec import CodecParams, DecodeResult, decode, decode_batch, encode, syndromes
from .errors import (
    DecodeUnreliable,
    DimensionMismatch,
    FortaError,
    IngestionError,
    InsufficientData,
    InvalidConfiguration,
    LocalizationFailure,
    ProtocolViolation,
)
from .harness import TrainingConfig, run_experiment, run_round
from .theory import FeedbackStats, TheoryParams

__all__ = [
    "AttackSpec", "SharingParams", "CodecParams", "DecodeResult",
    "decode", "decode_batch", "encode", "syndromes",
    "FortaError", "DimensionMismatch", "InvalidConfiguration",
    "LocalizationFailure", "DecodeUnreliable", "ProtocolViolation",
    "InsufficientData", "IngestionError",
    "TrainingConfig", "run_experiment", "run_round",
    "TheoryParams", "FeedbackStats",
]

__version__ = "0.1.0"
