"""Biometric hashing: vector-quantized feature subsets with Gray-coded codewords.

A model carries D index subsets of size M and one codebook of Q = 2**q
centroids per subset. Hashing a feature vector quantizes each subset to
its nearest centroid and concatenates the centroids' q-bit codewords,
giving a binary template of L = D * q bits. Subset plans are constrained
by a pairwise overlap bound theta and, for theta > 0, selected with
sequential floating forward search minimizing development-set EER.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass

import numpy as np

from .bits import BitString
from .errors import (
    ConfigurationError,
    DimensionError,
    EvalProtocolError,
    InsufficientDataError,
    ParseError,
    RangeError,
    SelectionStalledError,
)
from .evaluation import eer_from_arrays
from .features import FeatureDataset, FeatureVector, PairProtocol
from .matcher import hamming


def gray_code(rank: int, q: int) -> BitString:
    """Reflected Gray codeword of a rank, as q bits (most significant first)."""
    if q < 1:
        raise RangeError("codeword width must be >= 1")
    if not 0 <= rank < (1 << q):
        raise RangeError(f"rank {rank} outside [0, {1 << q})")
    g = rank ^ (rank >> 1)
    return BitString.from_bits((g >> (q - 1 - i)) & 1 for i in range(q))


@dataclass(frozen=True)
class Codebook:
    """Centroids in rank order with their Gray codewords."""

    centroids: np.ndarray  # (Q, M), rank order
    codewords: tuple  # of BitString, aligned with centroid ranks

    def __post_init__(self):
        cents = np.array(self.centroids, dtype=np.float64)
        cents.setflags(write=False)
        object.__setattr__(self, "centroids", cents)
        object.__setattr__(self, "codewords", tuple(self.codewords))
        qn = len(self.codewords)
        if cents.ndim != 2 or cents.shape[0] != qn:
            raise DimensionError("need one codeword per centroid")
        if qn < 2 or qn & (qn - 1):
            raise ConfigurationError(f"codebook size must be a power of two >= 2, got {qn}")
        if len(set(self.codewords)) != qn:
            raise ConfigurationError("codewords must be pairwise distinct")

    @property
    def size(self) -> int:
        return int(self.centroids.shape[0])

    @property
    def dim(self) -> int:
        return int(self.centroids.shape[1])

    @property
    def code_bits(self) -> int:
        return self.codewords[0].length


@dataclass(frozen=True)
class SubsetPlan:
    """Ordered feature-index subsets with their pairwise overlap bound."""

    subsets: tuple  # of tuple[int, ...]
    theta: int

    def __post_init__(self):
        subsets = tuple(tuple(int(i) for i in s) for s in self.subsets)
        object.__setattr__(self, "subsets", subsets)
        if not subsets:
            raise ConfigurationError("a plan needs at least one subset")
        m = len(subsets[0])
        for s in subsets:
            if len(s) != m or len(set(s)) != m:
                raise ConfigurationError("every subset must hold exactly M distinct indices")
            if min(s) < 0:
                raise RangeError("feature indices must be nonnegative")
        sets = [frozenset(s) for s in subsets]
        for i in range(len(sets)):
            for j in range(i + 1, len(sets)):
                if len(sets[i] & sets[j]) > self.theta:
                    raise ConfigurationError(
                        f"subsets {i} and {j} overlap in more than theta={self.theta} indices"
                    )

    @property
    def n_subsets(self) -> int:
        return len(self.subsets)

    @property
    def subset_size(self) -> int:
        return len(self.subsets[0])


@dataclass(frozen=True)
class BioHashConfig:
    n: int  # input feature dimension
    m: int  # subset size
    q: int  # bits per subset
    theta: int  # max pairwise subset overlap
    target_d: int  # number of subsets

    def __post_init__(self):
        if self.q < 1:
            raise ConfigurationError("q must be >= 1")
        if not 1 <= self.m <= self.n:
            raise ConfigurationError("need 1 <= M <= N")
        if not 0 <= self.theta < self.m:
            raise ConfigurationError("need 0 <= theta < M")
        if self.target_d < 1:
            raise ConfigurationError("target_d must be >= 1")

    @property
    def codebook_size(self) -> int:
        return 1 << self.q


@dataclass(frozen=True)
class ProtectedTemplate:
    """Binary template plus the id of the model that produced it."""

    bits: BitString
    model_id: str


@dataclass(frozen=True)
class DevSet:
    """Labeled development samples with a genuine/impostor pair protocol."""

    samples: FeatureDataset
    pairs: PairProtocol

    def __post_init__(self):
        self.pairs.validate_against(self.samples)
        if self.pairs.n_genuine == 0 or self.pairs.n_impostor == 0:
            raise EvalProtocolError("development pairs must include both genuine and impostor entries")


@dataclass(frozen=True)
class BioHashModel:
    plan: SubsetPlan
    codebooks: tuple  # of Codebook, aligned with plan.subsets
    config: BioHashConfig
    dev_eer: float | None = None
    dev_threshold: float | None = None
    model_id: str = ""

    def __post_init__(self):
        object.__setattr__(self, "codebooks", tuple(self.codebooks))
        if len(self.codebooks) != self.plan.n_subsets:
            raise ConfigurationError("need exactly one codebook per subset")
        for cb in self.codebooks:
            if cb.dim != self.config.m:
                raise DimensionError("codebook centroid dimension must equal M")
            if cb.code_bits != self.config.q:
                raise ConfigurationError("codeword width must equal q")
        for s in self.plan.subsets:
            if max(s) >= self.config.n:
                raise RangeError("plan index outside the feature dimension")
        if not self.model_id:
            object.__setattr__(self, "model_id", _content_id(self))

    @property
    def output_bits(self) -> int:
        return self.plan.n_subsets * self.config.q


def kmeans(points, q: int, seed: int, restarts: int = 10, max_iter: int = 100) -> np.ndarray:
    """Cluster centroids via k-means++ restarts and Lloyd iterations.

    Converges when assignments stop changing (or at the iteration cap);
    empty clusters are repaired by stealing the farthest point. The best
    restart by within-cluster sum of squares wins; each returned centroid
    is the mean of its final cluster.
    """
    pts = np.asarray(points, dtype=np.float64)
    if pts.ndim != 2:
        raise DimensionError("points must form a (K, M) array")
    if q < 1:
        raise RangeError("cluster count must be >= 1")
    if len(pts) < q:
        raise InsufficientDataError(f"{len(pts)} points cannot fill {q} clusters")

    children = np.random.SeedSequence(seed).spawn(restarts)
    best_cents, best_wcss = None, None
    for child in children:
        rng = np.random.default_rng(child)
        cents, assign = _lloyd(pts, q, rng, max_iter)
        wcss = float(np.sum((pts - cents[assign]) ** 2))
        if best_wcss is None or wcss < best_wcss:
            best_cents, best_wcss = cents, wcss
    best_cents.setflags(write=False)
    return best_cents


def _plus_plus_init(pts, q, rng):
    n = len(pts)
    chosen = [int(rng.integers(n))]
    d2 = np.sum((pts - pts[chosen[0]]) ** 2, axis=1)
    for _ in range(1, q):
        total = d2.sum()
        if total > 0:
            idx = int(rng.choice(n, p=d2 / total))
        else:
            # All remaining mass sits on already-chosen coordinates
            # (duplicate points); fall back to an unchosen index.
            taken = set(chosen)
            rest = [i for i in range(n) if i not in taken]
            idx = rest[int(rng.integers(len(rest)))] if rest else int(rng.integers(n))
        chosen.append(idx)
        d2 = np.minimum(d2, np.sum((pts - pts[idx]) ** 2, axis=1))
    return pts[chosen].copy()


def _assign_points(pts, cents):
    d2 = np.sum((pts[:, None, :] - cents[None, :, :]) ** 2, axis=2)
    return d2.argmin(axis=1), d2


def _repair_empty(assign, d2, q):
    assign = assign.copy()
    counts = np.bincount(assign, minlength=q)
    for c in np.flatnonzero(counts == 0):
        own = d2[np.arange(len(assign)), assign]
        movable = counts[assign] > 1
        own = np.where(movable, own, -np.inf)
        victim = int(own.argmax())
        counts[assign[victim]] -= 1
        assign[victim] = c
        counts[c] += 1
    return assign


def _lloyd(pts, q, rng, max_iter):
    cents = _plus_plus_init(pts, q, rng)
    assign = None
    for _ in range(max_iter):
        new_assign, d2 = _assign_points(pts, cents)
        new_assign = _repair_empty(new_assign, d2, q)
        if assign is not None and np.array_equal(new_assign, assign):
            break
        assign = new_assign
        cents = np.stack([pts[assign == c].mean(axis=0) for c in range(q)])
    cents = np.stack([pts[assign == c].mean(axis=0) for c in range(q)])
    return cents, assign


def rank_and_encode(centroids) -> Codebook:
    """Rank centroids by distance to their common mean and Gray-code the ranks.

    Ascending distance; ties keep the original centroid order. Rank r gets
    the reflected Gray codeword of r.
    """
    cents = np.asarray(centroids, dtype=np.float64)
    if cents.ndim != 2:
        raise DimensionError("centroids must form a (Q, M) array")
    qn = len(cents)
    if qn < 2 or qn & (qn - 1):
        raise ConfigurationError(f"codebook size must be a power of two >= 2, got {qn}")
    mean = cents.mean(axis=0)
    dist = np.sqrt(np.sum((cents - mean) ** 2, axis=1))
    order = np.argsort(dist, kind="stable")
    q = qn.bit_length() - 1
    codewords = tuple(gray_code(r, q) for r in range(qn))
    return Codebook(cents[order], codewords)


def quantize_subset(x_sub, codebook: Codebook) -> BitString:
    """Codeword of the nearest centroid; distance ties go to the lower rank."""
    x = np.asarray(x_sub, dtype=np.float64)
    if x.shape != (codebook.dim,):
        raise DimensionError(f"expected a point of dimension {codebook.dim}, got shape {x.shape}")
    d2 = np.sum((codebook.centroids - x) ** 2, axis=1)
    return codebook.codewords[int(d2.argmin())]


def hash_vector(x: FeatureVector, model: BioHashModel) -> ProtectedTemplate:
    """Concatenate the nearest-centroid codewords of every planned subset."""
    if x.dim != model.config.n:
        raise DimensionError(f"vector has dimension {x.dim}, model expects {model.config.n}")
    parts = []
    for subset, cb in zip(model.plan.subsets, model.codebooks):
        parts.append(quantize_subset(x.values[list(subset)], cb))
    return ProtectedTemplate(BitString.concat(parts), model.model_id)


def hash_dataset(dataset: FeatureDataset, model: BioHashModel):
    """Hash every row; vectorized equivalent of mapping :func:`hash_vector`."""
    if not len(dataset):
        return []
    if dataset.dim != model.config.n:
        raise DimensionError(f"dataset dimension {dataset.dim}, model expects {model.config.n}")
    x = dataset.matrix()
    k = len(dataset)
    cols = []
    for subset, cb in zip(model.plan.subsets, model.codebooks):
        xs = x[:, list(subset)]
        d2 = np.sum((xs[:, None, :] - cb.centroids[None, :, :]) ** 2, axis=2)
        codes = d2.argmin(axis=1)
        word_bits = np.array([w.bits() for w in cb.codewords], dtype=np.uint8)
        cols.append(word_bits[codes])
    all_bits = np.concatenate(cols, axis=1).astype(np.uint8)
    return [
        ProtectedTemplate(BitString.from_bit_array(all_bits[i]), model.model_id)
        for i in range(k)
    ]


def enumerate_candidates(n: int, m: int, theta: int, pool_size: int, seed: int):
    """Candidate index subsets for plan selection.

    theta = 0 yields the disjoint consecutive partition (floor(N/M) subsets);
    theta > 0 yields up to pool_size distinct seeded random subsets. The
    pairwise overlap bound is enforced later, during selection.
    """
    if m > n:
        raise DimensionError(f"subset size {m} exceeds dimension {n}")
    if theta >= m:
        raise ConfigurationError(f"theta must be < M, got theta={theta} M={m}")
    if theta < 0:
        raise RangeError("theta must be nonnegative")

    if theta == 0:
        return [tuple(range(i * m, (i + 1) * m)) for i in range(n // m)]

    if pool_size < 1:
        raise RangeError("pool_size must be >= 1")
    rng = np.random.default_rng(seed)
    seen = set()
    out = []
    attempts = 0
    cap = pool_size * 20 + 100
    while len(out) < pool_size and attempts < cap:
        attempts += 1
        subset = tuple(sorted(int(i) for i in rng.choice(n, size=m, replace=False)))
        if subset not in seen:
            seen.add(subset)
            out.append(subset)
    return out


@dataclass(frozen=True)
class SffsSelection:
    plan: SubsetPlan
    codebooks: tuple  # trained codebooks aligned with plan.subsets
    objective_trace: tuple  # best dev EER after each accepted step


def _candidate_seed(seed: int, index: int) -> np.random.SeedSequence:
    return np.random.SeedSequence([seed, index])


def _train_candidate(points, q_bits, seed_seq, restarts):
    seed = int(seed_seq.generate_state(1)[0])
    cents = kmeans(points, 1 << q_bits, seed, restarts=restarts)
    return rank_and_encode(cents)


def sffs_select(candidates, devset: DevSet, target_d: int, q: int, seed: int,
                theta: int, restarts: int = 10) -> SffsSelection:
    """Sequential floating forward selection of subsets minimizing dev EER.

    Forward steps add the feasible candidate (pairwise overlap <= theta
    against the current plan) whose inclusion gives the lowest EER of
    Hamming scores over the development pairs; after each add, included
    subsets are floated out again while a removal strictly improves the
    best EER seen at the smaller plan size. Hamming distances decompose
    per subset, so each candidate's pair contributions are precomputed
    from its codebook once.
    """
    candidates = [tuple(int(i) for i in c) for c in candidates]
    nc = len(candidates)
    if nc < target_d:
        raise ConfigurationError(f"{nc} candidates cannot fill target_d={target_d}")
    x = devset.samples.matrix()
    k, n = x.shape
    big_q = 1 << q
    if k < big_q:
        raise InsufficientDataError(f"development set of {k} samples cannot train {big_q} clusters")

    pair_a = np.array([a for a, _, _ in devset.pairs.pairs])
    pair_b = np.array([b for _, b, _ in devset.pairs.pairs])
    gen_mask = np.array([g for _, _, g in devset.pairs.pairs], dtype=bool)

    # Per-candidate codebooks, per-pair Hamming contributions.
    gray_words = [gray_code(r, q) for r in range(big_q)]
    pop_table = np.array(
        [[hamming(w1, w2) for w2 in gray_words] for w1 in gray_words], dtype=np.int32
    )
    codebooks = []
    contrib = np.empty((nc, len(pair_a)), dtype=np.int32)
    for c, subset in enumerate(candidates):
        cb = _train_candidate(x[:, list(subset)], q, _candidate_seed(seed, c), restarts)
        codebooks.append(cb)
        d2 = np.sum((x[:, list(subset)][:, None, :] - cb.centroids[None, :, :]) ** 2, axis=2)
        codes = d2.argmin(axis=1)
        contrib[c] = pop_table[codes[pair_a], codes[pair_b]]

    # Pairwise overlap counts between candidates.
    membership = np.zeros((nc, n), dtype=np.int16)
    for c, subset in enumerate(candidates):
        membership[c, list(subset)] = 1
    overlap = membership @ membership.T

    def eer_of(sums):
        return eer_from_arrays(sums[gen_mask], sums[~gen_mask])[0]

    selected: list[int] = []
    current = np.zeros(len(pair_a), dtype=np.int64)
    best_at_size: dict[int, float] = {}
    trace: list[float] = []
    best_so_far = np.inf

    def log_step(eer):
        nonlocal best_so_far
        best_so_far = min(best_so_far, eer)
        trace.append(best_so_far)
        size = len(selected)
        if size not in best_at_size or eer < best_at_size[size]:
            best_at_size[size] = eer

    while len(selected) < target_d:
        in_plan = np.zeros(nc, dtype=bool)
        in_plan[selected] = True
        feasible = ~in_plan
        if selected:
            feasible &= (overlap[:, selected].max(axis=1) <= theta)
        feasible_idx = np.flatnonzero(feasible)
        if feasible_idx.size == 0:
            raise SelectionStalledError(
                f"no feasible candidate at plan size {len(selected)}", achieved_d=len(selected)
            )
        eers = [eer_of(current + contrib[c]) for c in feasible_idx]
        pick = int(feasible_idx[int(np.argmin(eers))])
        selected.append(pick)
        current = current + contrib[pick]
        log_step(min(eers))

        # Floating backward: drop a subset while that strictly improves the
        # best EER recorded for the smaller size (never the one just added).
        while len(selected) > 2:
            removable = selected[:-1]
            drop_eers = [eer_of(current - contrib[r]) for r in removable]
            best_j = int(np.argmin(drop_eers))
            smaller = len(selected) - 1
            reference = best_at_size.get(smaller, np.inf)
            if drop_eers[best_j] < reference:
                victim = removable[best_j]
                selected.remove(victim)
                current = current - contrib[victim]
                log_step(drop_eers[best_j])
            else:
                break

    plan = SubsetPlan(tuple(candidates[c] for c in selected), theta)
    chosen_books = tuple(codebooks[c] for c in selected)
    return SffsSelection(plan, chosen_books, tuple(trace))


def train_model(devset: DevSet, config: BioHashConfig, seed: int,
                pool_size: int | None = None, restarts: int = 10) -> BioHashModel:
    """Train a complete model: plan selection plus one codebook per subset.

    theta = 0 takes the disjoint consecutive partition directly (no search);
    theta > 0 draws a candidate pool (default 4 * target_d) and runs SFFS.
    The development EER and its threshold are evaluated on the final model
    and stored so verification has a default operating point.
    """
    if devset.samples.dim != config.n:
        raise DimensionError(
            f"development dimension {devset.samples.dim} does not match N={config.n}"
        )
    if len(devset.samples) < config.codebook_size:
        raise InsufficientDataError(
            f"development set of {len(devset.samples)} samples cannot train "
            f"{config.codebook_size} clusters"
        )

    if config.theta == 0:
        candidates = enumerate_candidates(config.n, config.m, 0, 0, seed)
        if len(candidates) < config.target_d:
            raise ConfigurationError(
                f"disjoint partition yields {len(candidates)} subsets, "
                f"target_d={config.target_d} requested"
            )
        chosen = candidates[: config.target_d]
        x = devset.samples.matrix()
        books = tuple(
            _train_candidate(x[:, list(s)], config.q, _candidate_seed(seed, i), restarts)
            for i, s in enumerate(chosen)
        )
        plan = SubsetPlan(tuple(chosen), 0)
    else:
        pool = pool_size if pool_size is not None else 4 * config.target_d
        candidates = enumerate_candidates(config.n, config.m, config.theta, pool, seed)
        selection = sffs_select(
            candidates, devset, config.target_d, config.q, seed, config.theta, restarts=restarts
        )
        plan, books = selection.plan, selection.codebooks

    model = BioHashModel(plan, books, config)
    templates = hash_dataset(devset.samples, model)
    gen, imp = [], []
    for a, b, g in devset.pairs.pairs:
        (gen if g else imp).append(float(hamming(templates[a].bits, templates[b].bits)))
    dev_eer, dev_threshold = eer_from_arrays(np.array(gen), np.array(imp))
    return BioHashModel(plan, books, config, dev_eer, dev_threshold, model.model_id)


# -- serialization -----------------------------------------------------------

_FORMAT = "biohash-model/1"


def _model_payload(model: BioHashModel) -> dict:
    return {
        "format": _FORMAT,
        "config": {
            "n": model.config.n,
            "m": model.config.m,
            "q": model.config.q,
            "theta": model.config.theta,
            "target_d": model.config.target_d,
        },
        "plan": [list(s) for s in model.plan.subsets],
        "codebooks": [
            {"centroids": [[float(v) for v in row] for row in cb.centroids]}
            for cb in model.codebooks
        ],
        "dev_eer": model.dev_eer,
        "dev_threshold": model.dev_threshold,
    }


def _content_id(model: BioHashModel) -> str:
    blob = json.dumps(_model_payload(model), sort_keys=True, separators=(",", ":"))
    return hashlib.sha3_256(blob.encode("utf-8")).hexdigest()[:16]


def model_to_json(model: BioHashModel) -> str:
    """Canonical text artifact; loading it reproduces bit-identical hashes."""
    payload = _model_payload(model)
    payload["model_id"] = model.model_id
    return json.dumps(payload, sort_keys=True, indent=1) + "\n"


def model_from_json(text: str) -> BioHashModel:
    try:
        payload = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"model artifact is not valid JSON: {exc}") from None
    if payload.get("format") != _FORMAT:
        raise ParseError(f"unknown model format {payload.get('format')!r}")
    cfg = BioHashConfig(**payload["config"])
    plan = SubsetPlan(tuple(tuple(s) for s in payload["plan"]), cfg.theta)
    books = tuple(
        Codebook(
            np.array(cb["centroids"], dtype=np.float64),
            tuple(gray_code(r, cfg.q) for r in range(len(cb["centroids"]))),
        )
        for cb in payload["codebooks"]
    )
    return BioHashModel(
        plan,
        books,
        cfg,
        payload.get("dev_eer"),
        payload.get("dev_threshold"),
        payload.get("model_id", ""),
    )
