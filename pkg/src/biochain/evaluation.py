"""Verification metrics over genuine/impostor score sets.

Scores are distances (lower = more similar) throughout. The equal error
rate is estimated at the FAR/FRR crossing with linear interpolation
between bracketing thresholds; accuracy is the best-threshold
classification accuracy over the pair protocol.
"""

from __future__ import annotations

from bisect import bisect_right
from dataclasses import dataclass

import numpy as np

from .errors import EvalProtocolError, RangeError
from .features import FeatureDataset, PairProtocol, subsample_dataset
from .matcher import hamming


@dataclass(frozen=True)
class ScoreSet:
    """Distance scores split by pair label."""

    genuine: tuple
    impostor: tuple

    def __post_init__(self):
        object.__setattr__(self, "genuine", tuple(float(s) for s in self.genuine))
        object.__setattr__(self, "impostor", tuple(float(s) for s in self.impostor))
        for s in self.genuine + self.impostor:
            if not np.isfinite(s) or s < 0:
                raise RangeError(f"scores must be finite and >= 0, got {s}")


@dataclass(frozen=True)
class EvalReport:
    eer: float
    eer_threshold: float
    accuracy: float
    accuracy_threshold: float
    n_genuine: int
    n_impostor: int


def _require_nonempty(scores: ScoreSet):
    if not scores.genuine or not scores.impostor:
        raise EvalProtocolError("both genuine and impostor score lists must be non-empty")


def eer_from_arrays(genuine: np.ndarray, impostor: np.ndarray):
    """(eer, threshold) at the FAR/FRR crossing for raw score arrays.

    FAR(t) is the impostor fraction with score <= t, FRR(t) the genuine
    fraction with score > t. Crossings that fall between two pooled
    thresholds are linearly interpolated. Rate equality is detected in
    integer arithmetic, so exact crossings are hit exactly.
    """
    gen = np.sort(np.asarray(genuine, dtype=np.float64))
    imp = np.sort(np.asarray(impostor, dtype=np.float64))
    ng, ni = len(gen), len(imp)
    if ng == 0 or ni == 0:
        raise EvalProtocolError("both genuine and impostor score lists must be non-empty")

    thresholds = np.unique(np.concatenate([gen, imp]))
    fa = np.searchsorted(imp, thresholds, side="right").astype(np.int64)
    fr = ng - np.searchsorted(gen, thresholds, side="right").astype(np.int64)
    # diff(t) = (FAR - FRR) * ng * ni, kept integral; nondecreasing in t,
    # and positive at the last threshold (FAR = 1, FRR = 0).
    diff = fa * ng - fr * ni
    k = int(np.argmax(diff >= 0))
    if diff[k] == 0:
        return fa[k] / ni, float(thresholds[k])
    if k == 0:
        far0, frr0, t0 = 0.0, 1.0, None
    else:
        far0, frr0, t0 = fa[k - 1] / ni, fr[k - 1] / ng, float(thresholds[k - 1])
    far1, frr1 = fa[k] / ni, fr[k] / ng
    lam = (frr0 - far0) / ((far1 - far0) + (frr0 - frr1))
    eer = far0 + lam * (far1 - far0)
    if t0 is None:
        return float(eer), float(thresholds[k])
    return float(eer), t0 + lam * (float(thresholds[k]) - t0)


def compute_eer(scores: ScoreSet):
    """(eer, threshold) for a validated score set; see :func:`eer_from_arrays`."""
    _require_nonempty(scores)
    return eer_from_arrays(np.array(scores.genuine), np.array(scores.impostor))


def accuracy_thresholds(scores: ScoreSet):
    """Candidate thresholds: below-all sentinel, pooled midpoints, above-all sentinel."""
    pooled = sorted(set(scores.genuine) | set(scores.impostor))
    cands = [pooled[0] - 1.0]
    cands.extend((a + b) / 2.0 for a, b in zip(pooled, pooled[1:]))
    cands.append(pooled[-1] + 1.0)
    return cands


def compute_accuracy(scores: ScoreSet):
    """(accuracy, threshold) maximizing correct decisions; lowest threshold on ties."""
    _require_nonempty(scores)
    gen = sorted(scores.genuine)
    imp = sorted(scores.impostor)
    ng, ni = len(gen), len(imp)
    total = ng + ni

    best_correct, best_t = -1, None
    for t in accuracy_thresholds(scores):
        correct = bisect_right(gen, t) + (ni - bisect_right(imp, t))
        if correct > best_correct:
            best_correct, best_t = correct, t
    return best_correct / total, best_t


def evaluate_scores(scores: ScoreSet) -> EvalReport:
    eer, eer_t = compute_eer(scores)
    acc, acc_t = compute_accuracy(scores)
    return EvalReport(eer, eer_t, acc, acc_t, len(scores.genuine), len(scores.impostor))


def euclidean_scores(dataset: FeatureDataset, pairs: PairProtocol) -> ScoreSet:
    """Score every pair with Euclidean distance on the raw features."""
    pairs.validate_against(dataset)
    m = dataset.matrix()
    idx_a = np.array([a for a, _, _ in pairs.pairs], dtype=int)
    idx_b = np.array([b for _, b, _ in pairs.pairs], dtype=int)
    d = np.sqrt(np.sum((m[idx_a] - m[idx_b]) ** 2, axis=1))
    genuine = [float(d[k]) for k, (_, _, g) in enumerate(pairs.pairs) if g]
    impostor = [float(d[k]) for k, (_, _, g) in enumerate(pairs.pairs) if not g]
    return ScoreSet(tuple(genuine), tuple(impostor))


def _trial_seed(seed: int, size: int, trial: int) -> int:
    return int(np.random.SeedSequence([seed, size, trial]).generate_state(1)[0])


@dataclass(frozen=True)
class SweepPoint:
    size: int
    trials: int
    mean_eer: float
    mean_accuracy: float


def size_sweep(dataset: FeatureDataset, pairs: PairProtocol, sizes, trials: int, seed: int):
    """Performance versus retained feature count.

    Each point averages ``trials`` seeded feature-removal masks; every mask
    is shared across the whole dataset so pairs stay comparable.
    """
    if trials < 1:
        raise RangeError("trials must be >= 1")
    n = dataset.dim
    curve = []
    for size in sizes:
        if size > n:
            raise RangeError(f"size {size} exceeds feature dimension {n}")
        eers, accs = [], []
        for trial in range(trials):
            sub = subsample_dataset(dataset, size, _trial_seed(seed, size, trial))
            report = evaluate_scores(euclidean_scores(sub, pairs))
            eers.append(report.eer)
            accs.append(report.accuracy)
        curve.append(SweepPoint(size, trials, float(np.mean(eers)), float(np.mean(accs))))
    return curve


@dataclass(frozen=True)
class ProtectionRow:
    case: str
    theta: int
    n_features: int
    feature_kind: str  # "real" or "binary"
    eer: float


def protection_table(devset, eval_dataset: FeatureDataset, eval_pairs: PairProtocol,
                     configs, m: int = 4, q: int = 3, seed: int = 0):
    """Unprotected baseline row plus one protected row per (theta, target_d) config.

    The baseline scores raw features with Euclidean distance; protected rows
    train a biohash model on the development set and score eval pairs with
    Hamming distance on the hashed templates.
    """
    # imported here: biohash itself depends on this module
    from .biohash import BioHashConfig, hash_dataset, train_model

    baseline = evaluate_scores(euclidean_scores(eval_dataset, eval_pairs))
    rows = [ProtectionRow("unprotected", 0, eval_dataset.dim, "real", baseline.eer)]

    for theta, target_d in configs:
        cfg = BioHashConfig(n=eval_dataset.dim, m=m, q=q, theta=theta, target_d=target_d)
        model = train_model(devset, cfg, seed)
        hashed = hash_dataset(eval_dataset, model)
        scores = hamming_scores(hashed, eval_pairs)
        report = evaluate_scores(scores)
        rows.append(
            ProtectionRow(f"protected_theta{theta}", theta, model.output_bits, "binary", report.eer)
        )
    return rows


def hamming_scores(templates, pairs: PairProtocol) -> ScoreSet:
    """Score pairs of protected templates by Hamming distance."""
    genuine, impostor = [], []
    for a, b, g in pairs.pairs:
        d = hamming(templates[a].bits, templates[b].bits)
        (genuine if g else impostor).append(float(d))
    return ScoreSet(tuple(genuine), tuple(impostor))
