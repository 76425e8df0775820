"""Feature datasets: parsing, synthesis, pairing and subsampling.

A dataset is an ordered list of feature vectors, one per biometric sample.
Subjects may contribute several rows; comparison protocols reference rows
by index so that same-subject (genuine) and cross-subject (impostor)
pairs are unambiguous.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .errors import (
    ConfigurationError,
    DimensionError,
    EmptySpecError,
    InsufficientPairsError,
    ParseError,
    RangeError,
)


def _as_readonly_array(values, dtype=np.float64) -> np.ndarray:
    arr = np.array(values, dtype=dtype)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class FeatureVector:
    """One real-valued embedding with its subject label."""

    subject_id: str
    values: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "values", _as_readonly_array(self.values))
        if self.values.ndim != 1 or self.values.size < 1:
            raise DimensionError("feature vector must be a non-empty 1-D sequence")
        if not np.all(np.isfinite(self.values)):
            raise ParseError(f"non-finite value in vector for subject {self.subject_id!r}")

    @property
    def dim(self) -> int:
        return int(self.values.size)

    def __eq__(self, other):
        return (
            isinstance(other, FeatureVector)
            and self.subject_id == other.subject_id
            and np.array_equal(self.values, other.values)
        )


@dataclass(frozen=True, eq=False)
class TimeSeriesTemplate:
    """Variable-length multi-channel template (default 21 channels at 100 Hz)."""

    subject_id: str
    channels: np.ndarray  # shape (C, T)
    sample_rate: float = 100.0

    def __post_init__(self):
        object.__setattr__(self, "channels", _as_readonly_array(self.channels))
        if self.channels.ndim != 2 or self.channels.shape[1] < 1:
            raise DimensionError("channels must form a (C, T) array with T >= 1")
        if not np.all(np.isfinite(self.channels)):
            raise ParseError(f"non-finite sample for subject {self.subject_id!r}")

    @property
    def n_channels(self) -> int:
        return int(self.channels.shape[0])

    @property
    def length(self) -> int:
        return int(self.channels.shape[1])

    def frame(self, t: int) -> np.ndarray:
        """Channel values at time index ``t``."""
        return self.channels[:, t]

    def __eq__(self, other):
        return (
            isinstance(other, TimeSeriesTemplate)
            and self.subject_id == other.subject_id
            and self.sample_rate == other.sample_rate
            and np.array_equal(self.channels, other.channels)
        )


@dataclass(frozen=True)
class PairProtocol:
    """Row-index comparison pairs, each flagged genuine or impostor."""

    pairs: tuple

    def __post_init__(self):
        object.__setattr__(self, "pairs", tuple((int(a), int(b), bool(g)) for a, b, g in self.pairs))

    @property
    def n_genuine(self) -> int:
        return sum(1 for _, _, g in self.pairs if g)

    @property
    def n_impostor(self) -> int:
        return sum(1 for _, _, g in self.pairs if not g)

    def validate_against(self, dataset: "FeatureDataset") -> None:
        n = len(dataset)
        for a, b, _ in self.pairs:
            if not (0 <= a < n and 0 <= b < n):
                raise RangeError(f"pair index ({a}, {b}) outside dataset of {n} rows")


@dataclass(frozen=True)
class SyntheticSpec:
    """Parameters for a seeded Gaussian-cluster dataset."""

    n_classes: int
    samples_per_class: int
    dimension: int
    intra_class_spread: float
    inter_class_spread: float
    seed: int


class FeatureDataset:
    """Ordered collection of feature vectors of one common dimension."""

    def __init__(self, vectors):
        self.vectors = list(vectors)
        if self.vectors:
            n = self.vectors[0].dim
            for i, v in enumerate(self.vectors):
                if v.dim != n:
                    raise DimensionError(f"row {i} has dimension {v.dim}, expected {n}")

    def __len__(self):
        return len(self.vectors)

    def __iter__(self):
        return iter(self.vectors)

    def __getitem__(self, i) -> FeatureVector:
        return self.vectors[i]

    def __eq__(self, other):
        return isinstance(other, FeatureDataset) and self.vectors == other.vectors

    @property
    def dim(self) -> int:
        if not self.vectors:
            raise RangeError("empty dataset has no dimension")
        return self.vectors[0].dim

    @property
    def subjects(self):
        seen = {}
        for i, v in enumerate(self.vectors):
            seen.setdefault(v.subject_id, []).append(i)
        return seen

    def matrix(self) -> np.ndarray:
        """All rows stacked as a (len, dim) array."""
        return np.stack([v.values for v in self.vectors])


def _tokenize(line: str):
    # Comma and whitespace separators are both accepted, also mixed.
    return line.replace(",", " ").split()


def load_feature_table(source, declared_n: int) -> FeatureDataset:
    """Parse a delimited table: one sample per row, subject id then N reals.

    Blank lines and ``#`` comment lines are skipped. Row indices in error
    messages are 1-based over data rows.
    """
    if isinstance(source, bytes):
        text = source.decode("utf-8")
    elif isinstance(source, str):
        text = source
    else:
        raw = source.read()
        text = raw.decode("utf-8") if isinstance(raw, bytes) else raw

    vectors = []
    row = 0
    for line in text.splitlines():
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        row += 1
        tokens = _tokenize(stripped)
        if len(tokens) < 2:
            raise ParseError(f"row {row}: expected a subject id and values")
        subject, raw_values = tokens[0], tokens[1:]
        try:
            values = [float(t) for t in raw_values]
        except ValueError as exc:
            raise ParseError(f"row {row}: non-numeric value ({exc})") from None
        if len(values) != declared_n:
            raise DimensionError(
                f"row {row}: got {len(values)} values, declared dimension is {declared_n}"
            )
        vectors.append(FeatureVector(subject, values))
    return FeatureDataset(vectors)


def dump_feature_table(dataset: FeatureDataset) -> str:
    """Serialize a dataset so that :func:`load_feature_table` round-trips it."""
    lines = []
    for v in dataset:
        lines.append(",".join([v.subject_id] + [repr(float(x)) for x in v.values]))
    return "\n".join(lines) + ("\n" if lines else "")


def load_fixed_table(source):
    """Parse a fixed-point vector table: feature-table rows of integers plus a
    ``# scale=S`` header declaring the decimal scaling factor.

    Returns ``(scale, rows)`` with rows as (subject_id, list of ints).
    """
    if isinstance(source, bytes):
        text = source.decode("utf-8")
    elif isinstance(source, str):
        text = source
    else:
        raw = source.read()
        text = raw.decode("utf-8") if isinstance(raw, bytes) else raw

    scale = None
    rows = []
    row = 0
    for line in text.splitlines():
        stripped = line.strip()
        if not stripped:
            continue
        if stripped.startswith("#"):
            body = stripped.lstrip("#").strip()
            if body.startswith("scale"):
                _, _, value = body.partition("=")
                try:
                    scale = int(value.strip())
                except ValueError:
                    raise ParseError(f"bad scale header {stripped!r}") from None
            continue
        row += 1
        tokens = _tokenize(stripped)
        if len(tokens) < 2:
            raise ParseError(f"row {row}: expected a subject id and values")
        try:
            rows.append((tokens[0], [int(t) for t in tokens[1:]]))
        except ValueError as exc:
            raise ParseError(f"row {row}: non-integer value ({exc})") from None
    if scale is None:
        raise ParseError("fixed-point table is missing its '# scale=S' header")
    return scale, rows


def dump_fixed_table(scale: int, rows) -> str:
    """Inverse of :func:`load_fixed_table`."""
    lines = [f"# scale={int(scale)}"]
    for subject, values in rows:
        lines.append(",".join([subject] + [str(int(v)) for v in values]))
    return "\n".join(lines) + "\n"


def load_time_series(source, subject_id: str = "anon", sample_rate: float = 100.0):
    """Parse one channel-set file: header row names channels, rows are samples.

    Returns ``(channel_names, template)``; channels come out as rows of the
    template's (C, T) array in header order.
    """
    if isinstance(source, bytes):
        text = source.decode("utf-8")
    elif isinstance(source, str):
        text = source
    else:
        raw = source.read()
        text = raw.decode("utf-8") if isinstance(raw, bytes) else raw

    lines = [ln.strip() for ln in text.splitlines() if ln.strip() and not ln.strip().startswith("#")]
    if not lines:
        raise ParseError("time-series file has no header row")
    names = _tokenize(lines[0])
    rows = []
    for row, line in enumerate(lines[1:], start=1):
        tokens = _tokenize(line)
        if len(tokens) != len(names):
            raise ParseError(f"row {row}: expected {len(names)} channel values, got {len(tokens)}")
        try:
            rows.append([float(t) for t in tokens])
        except ValueError as exc:
            raise ParseError(f"row {row}: non-numeric value ({exc})") from None
    if not rows:
        raise ParseError("time-series file has a header but no samples")
    channels = np.array(rows, dtype=np.float64).T
    return names, TimeSeriesTemplate(subject_id, channels, sample_rate)


def dump_time_series(names, template: TimeSeriesTemplate) -> str:
    if len(names) != template.n_channels:
        raise DimensionError("header names must match the channel count")
    lines = [",".join(names)]
    for t in range(template.length):
        lines.append(",".join(repr(float(x)) for x in template.channels[:, t]))
    return "\n".join(lines) + "\n"


def synth_dataset(spec: SyntheticSpec) -> FeatureDataset:
    """Seeded Gaussian clusters: one isotropic cluster per class.

    Class centers are drawn with standard deviation ``inter_class_spread``
    and samples around each center with ``intra_class_spread``.
    """
    if spec.n_classes < 1 or spec.samples_per_class < 1:
        raise EmptySpecError("need at least one class and one sample per class")
    if spec.dimension < 1:
        raise ConfigurationError("dimension must be >= 1")
    if spec.intra_class_spread < 0 or spec.inter_class_spread <= 0:
        raise ConfigurationError("spreads must satisfy intra >= 0 and inter > 0")

    rng = np.random.default_rng(spec.seed)
    centers = rng.normal(0.0, spec.inter_class_spread, size=(spec.n_classes, spec.dimension))
    vectors = []
    for c in range(spec.n_classes):
        noise = rng.normal(0.0, 1.0, size=(spec.samples_per_class, spec.dimension))
        samples = centers[c] + spec.intra_class_spread * noise
        for s in range(spec.samples_per_class):
            vectors.append(FeatureVector(f"s{c:03d}", samples[s]))
    return FeatureDataset(vectors)


def make_pairs(dataset: FeatureDataset, n_genuine: int, n_impostor: int, seed: int) -> PairProtocol:
    """Sample same-subject and cross-subject row pairs without replacement."""
    if n_genuine < 0 or n_impostor < 0:
        raise RangeError("pair counts must be nonnegative")

    n = len(dataset)
    groups = dataset.subjects if n else {}
    genuine_candidates = []
    for indices in groups.values():
        genuine_candidates.extend(itertools.combinations(indices, 2))
    genuine_candidates.sort()
    same_total = len(genuine_candidates)
    cross_total = n * (n - 1) // 2 - same_total

    if n_genuine > same_total:
        raise InsufficientPairsError(
            f"requested {n_genuine} genuine pairs, only {same_total} exist"
        )
    if n_impostor > cross_total:
        raise InsufficientPairsError(
            f"requested {n_impostor} impostor pairs, only {cross_total} exist"
        )

    rng = np.random.default_rng(seed)
    pairs = []
    if n_genuine:
        chosen = rng.choice(same_total, size=n_genuine, replace=False)
        for k in sorted(chosen):
            a, b = genuine_candidates[k]
            pairs.append((a, b, True))

    if n_impostor:
        pairs.extend(_sample_impostors(dataset, n_impostor, cross_total, rng))
    return PairProtocol(tuple(pairs))


def _sample_impostors(dataset, n_impostor, cross_total, rng):
    subjects = [v.subject_id for v in dataset]
    n = len(dataset)
    # Dense requests enumerate; sparse requests reject-sample for speed.
    if cross_total <= 200_000 or n_impostor * 4 >= cross_total:
        candidates = [
            (a, b)
            for a, b in itertools.combinations(range(n), 2)
            if subjects[a] != subjects[b]
        ]
        chosen = rng.choice(len(candidates), size=n_impostor, replace=False)
        return [(candidates[k][0], candidates[k][1], False) for k in sorted(chosen)]

    picked = set()
    while len(picked) < n_impostor:
        a = int(rng.integers(0, n))
        b = int(rng.integers(0, n))
        if a == b or subjects[a] == subjects[b]:
            continue
        picked.add((min(a, b), max(a, b)))
    return [(a, b, False) for a, b in sorted(picked)]


def subsample_mask(n: int, keep: int, seed: int) -> np.ndarray:
    """Seed-deterministic set of ``keep`` distinct indices in ascending order.

    The mask depends only on (seed, n, keep), so applying it across a whole
    dataset removes the same features from every sample.
    """
    if keep < 1 or keep > n:
        raise RangeError(f"keep must be in [1, {n}], got {keep}")
    rng = np.random.default_rng(seed)
    idx = np.sort(rng.choice(n, size=keep, replace=False))
    idx.setflags(write=False)
    return idx


def subsample_features(vec: FeatureVector, keep: int, seed: int) -> FeatureVector:
    """Retain the seeded index set; same (seed, N, keep) yields the same set."""
    mask = subsample_mask(vec.dim, keep, seed)
    return FeatureVector(vec.subject_id, vec.values[mask])


def subsample_dataset(dataset: FeatureDataset, keep: int, seed: int) -> FeatureDataset:
    """Apply one shared subsampling mask to every vector of the dataset."""
    if not len(dataset):
        return FeatureDataset([])
    mask = subsample_mask(dataset.dim, keep, seed)
    return FeatureDataset(
        [FeatureVector(v.subject_id, v.values[mask]) for v in dataset]
    )
