"""Biometric template protection with biohashing, evaluated on a simulated
gas-metered blockchain."""

from .biohash import (
    BioHashConfig,
    BioHashModel,
    DevSet,
    ProtectedTemplate,
    hash_vector,
    model_from_json,
    model_to_json,
    train_model,
)
from .bits import BitString
from .chain import ChainConfig, GasReceipt, GasSchedule, SimulatedChain
from .errors import BiochainError
from .evaluation import ScoreSet, compute_accuracy, compute_eer, protection_table, size_sweep
from .features import (
    FeatureDataset,
    FeatureVector,
    PairProtocol,
    SyntheticSpec,
    TimeSeriesTemplate,
    load_feature_table,
    make_pairs,
    synth_dataset,
)
from .matcher import (
    FixedPointConfig,
    dtw,
    euclidean,
    fixedpoint_euclidean,
    hamming,
    newton_nth_root,
    popcount,
    signature_score,
)
from .storage import MerkleTree, OffChainStore, SchemeKind, TemplateStore, digest

__version__ = "0.1.0"

__all__ = [
    "BioHashConfig",
    "BioHashModel",
    "BiochainError",
    "BitString",
    "ChainConfig",
    "DevSet",
    "FeatureDataset",
    "FeatureVector",
    "FixedPointConfig",
    "GasReceipt",
    "GasSchedule",
    "MerkleTree",
    "OffChainStore",
    "PairProtocol",
    "ProtectedTemplate",
    "SchemeKind",
    "ScoreSet",
    "SimulatedChain",
    "SyntheticSpec",
    "TemplateStore",
    "TimeSeriesTemplate",
    "compute_accuracy",
    "compute_eer",
    "digest",
    "dtw",
    "euclidean",
    "fixedpoint_euclidean",
    "hamming",
    "hash_vector",
    "load_feature_table",
    "make_pairs",
    "model_from_json",
    "model_to_json",
    "newton_nth_root",
    "popcount",
    "protection_table",
    "signature_score",
    "size_sweep",
    "synth_dataset",
    "train_model",
    "__version__",
]
