"""Feature/label file IO, synthetic clustered data, and train/query/retrieval splits."""

import json
import struct
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import DataError, FormatError, ParameterError, ShapeError

BINARY_MAGIC = b"AGFM"
BINARY_VERSION = 1
_HEADER = struct.Struct("<4sIII")  # magic, version, d, n


def default_ids(n, prefix="item"):
    return [f"{prefix}{i:06d}" for i in range(n)]


@dataclass(frozen=True)
class FeatureMatrix:
    """Real-valued d x n matrix, one column per item."""

    data: np.ndarray
    item_ids: list

    def __post_init__(self):
        data = np.ascontiguousarray(self.data, dtype=np.float64)
        if data.ndim != 2 or data.shape[0] < 1 or data.shape[1] < 1:
            raise ShapeError(f"feature matrix must be 2-D and non-empty, got shape {np.shape(self.data)}")
        bad = np.argwhere(~np.isfinite(data))
        if bad.size:
            i, j = bad[0]
            raise DataError(f"non-finite feature value at row {i}, column {j}")
        ids = list(self.item_ids)
        if len(ids) != data.shape[1]:
            raise ShapeError(f"{len(ids)} item ids for {data.shape[1]} columns")
        if len(set(ids)) != len(ids):
            raise DataError("item_ids contains duplicates")
        data.setflags(write=False)
        object.__setattr__(self, "data", data)
        object.__setattr__(self, "item_ids", ids)

    @property
    def d(self):
        return self.data.shape[0]

    @property
    def n(self):
        return self.data.shape[1]


@dataclass(frozen=True)
class AuxSemantics:
    """Binary c x n category-indicator matrix, one column per item."""

    data: np.ndarray
    category_names: list

    def __post_init__(self):
        data = np.ascontiguousarray(self.data, dtype=np.float64)
        if data.ndim != 2 or data.shape[0] < 1 or data.shape[1] < 1:
            raise ShapeError(f"aux matrix must be 2-D and non-empty, got shape {np.shape(self.data)}")
        bad = np.argwhere((data != 0.0) & (data != 1.0))
        if bad.size:
            i, j = bad[0]
            raise DataError(f"aux entry at row {i}, column {j} is not 0/1")
        names = list(self.category_names)
        if len(names) != data.shape[0]:
            raise ShapeError(f"{len(names)} category names for {data.shape[0]} rows")
        empty = np.flatnonzero(data.sum(axis=0) == 0)
        if empty.size:
            warnings.warn(
                f"{empty.size} item(s) have no auxiliary semantics (first: column {empty[0]})",
                stacklevel=2,
            )
        data.setflags(write=False)
        object.__setattr__(self, "data", data)
        object.__setattr__(self, "category_names", names)

    @property
    def c(self):
        return self.data.shape[0]

    @property
    def n(self):
        return self.data.shape[1]


@dataclass(frozen=True)
class DatasetSplit:
    """Index sets over [0, n): train/query disjoint, query/retrieval disjoint."""

    train: np.ndarray
    query: np.ndarray
    retrieval: np.ndarray

    def __post_init__(self):
        for name in ("train", "query", "retrieval"):
            idx = np.asarray(getattr(self, name), dtype=np.int64)
            if idx.ndim != 1:
                raise ShapeError(f"{name} indices must be 1-D")
            if idx.size and idx.min() < 0:
                raise ParameterError(f"negative index in {name}")
            idx.setflags(write=False)
            object.__setattr__(self, name, idx)
        if np.intersect1d(self.train, self.query).size:
            raise ParameterError("train and query sets overlap")
        if np.intersect1d(self.query, self.retrieval).size:
            raise ParameterError("query and retrieval sets overlap")


# ---------------------------------------------------------------------------
# file IO
#
# Text features: first line "d n", then d comma-separated rows of n values.
# Binary features: 16-byte header (magic, version, d, n), then d*n
# little-endian float32 values in row-major order.
# Aux / label files use the text feature layout with 0/1 entries.
# ---------------------------------------------------------------------------


def _parse_header_line(line, path):
    parts = line.split()
    if len(parts) != 2:
        raise FormatError(f"{path}: header must be 'rows cols', got {line!r}")
    try:
        rows, cols = int(parts[0]), int(parts[1])
    except ValueError as exc:
        raise FormatError(f"{path}: non-integer header {line!r}") from exc
    if rows < 1 or cols < 1:
        raise FormatError(f"{path}: header declares empty matrix {rows}x{cols}")
    return rows, cols


def _load_text_matrix(path):
    with open(path, "r", encoding="ascii") as fh:
        lines = [ln.strip() for ln in fh if ln.strip()]
    if not lines:
        raise FormatError(f"{path}: file is empty")
    rows, cols = _parse_header_line(lines[0], path)
    if len(lines) - 1 != rows:
        raise ShapeError(f"{path}: header declares {rows} rows, found {len(lines) - 1}")
    out = np.empty((rows, cols), dtype=np.float64)
    for i, line in enumerate(lines[1:]):
        tokens = line.split(",")
        if len(tokens) != cols:
            raise ShapeError(f"{path}: row {i} has {len(tokens)} values, expected {cols}")
        for j, tok in enumerate(tokens):
            try:
                val = float(tok)
            except ValueError as exc:
                raise FormatError(f"{path}: unparseable value {tok!r} at row {i}, column {j}") from exc
            if not np.isfinite(val):
                raise DataError(f"{path}: non-finite value at row {i}, column {j}")
            out[i, j] = val
    return out


def load_features(path, format="text"):
    """Load a FeatureMatrix from a text-csv or raw-binary file."""
    if format == "text":
        data = _load_text_matrix(path)
    elif format == "binary":
        with open(path, "rb") as fh:
            raw = fh.read()
        if len(raw) < _HEADER.size:
            raise FormatError(f"{path}: file too short for binary header")
        magic, version, d, n = _HEADER.unpack_from(raw)
        if magic != BINARY_MAGIC:
            raise FormatError(f"{path}: bad magic {magic!r}")
        if version != BINARY_VERSION:
            raise FormatError(f"{path}: unsupported version {version}")
        if d < 1 or n < 1:
            raise FormatError(f"{path}: header declares empty matrix {d}x{n}")
        payload = raw[_HEADER.size:]
        if len(payload) != d * n * 4:
            raise ShapeError(f"{path}: payload is {len(payload)} bytes, expected {d * n * 4}")
        data = np.frombuffer(payload, dtype="<f4").astype(np.float64).reshape(d, n)
        bad = np.argwhere(~np.isfinite(data))
        if bad.size:
            i, j = bad[0]
            raise DataError(f"{path}: non-finite value at row {i}, column {j}")
    else:
        raise ParameterError(f"unknown feature format {format!r}")
    return FeatureMatrix(data, default_ids(data.shape[1]))


def save_features(path, features, format="text"):
    """Write a FeatureMatrix. Binary round-trips bit-exactly (float32 payload)."""
    data = features.data
    if format == "text":
        with open(path, "w", encoding="ascii") as fh:
            fh.write(f"{features.d} {features.n}\n")
            for row in data:
                fh.write(",".join(f"{v:.9g}" for v in row) + "\n")
    elif format == "binary":
        with open(path, "wb") as fh:
            fh.write(_HEADER.pack(BINARY_MAGIC, BINARY_VERSION, features.d, features.n))
            fh.write(np.ascontiguousarray(data, dtype="<f4").tobytes())
    else:
        raise ParameterError(f"unknown feature format {format!r}")


def load_aux(path):
    """Load an AuxSemantics matrix (text layout, 0/1 entries)."""
    data = _load_text_matrix(path)
    bad = np.argwhere((data != 0.0) & (data != 1.0))
    if bad.size:
        i, j = bad[0]
        raise DataError(f"{path}: entry at row {i}, column {j} is not 0/1")
    return AuxSemantics(data, default_ids(data.shape[0], prefix="cat"))


def save_aux(path, aux):
    with open(path, "w", encoding="ascii") as fh:
        fh.write(f"{aux.c} {aux.n}\n")
        for row in aux.data:
            fh.write(",".join(str(int(v)) for v in row) + "\n")


def save_split(path, split):
    payload = {
        "train": split.train.tolist(),
        "query": split.query.tolist(),
        "retrieval": split.retrieval.tolist(),
    }
    with open(path, "w", encoding="ascii") as fh:
        json.dump(payload, fh)
        fh.write("\n")


def load_split(path):
    with open(path, "r", encoding="ascii") as fh:
        try:
            payload = json.load(fh)
        except json.JSONDecodeError as exc:
            raise FormatError(f"{path}: not valid JSON") from exc
    try:
        return DatasetSplit(
            np.asarray(payload["train"], dtype=np.int64),
            np.asarray(payload["query"], dtype=np.int64),
            np.asarray(payload["retrieval"], dtype=np.int64),
        )
    except KeyError as exc:
        raise FormatError(f"{path}: missing split key {exc}") from exc


# ---------------------------------------------------------------------------
# synthetic data and splits
# ---------------------------------------------------------------------------


def _cluster_means(c, d, sep, rng):
    if c == 1:
        return np.zeros((1, d))
    if c <= d:
        # scaled basis vectors: all pairwise distances exactly sep
        means = np.zeros((c, d))
        means[np.arange(c), np.arange(c)] = sep / np.sqrt(2.0)
        return means
    # more clusters than dimensions: random means rescaled to mean distance sep
    means = rng.standard_normal((c, d))
    diffs = means[:, None, :] - means[None, :, :]
    dist = np.sqrt((diffs**2).sum(-1))
    mean_dist = dist[np.triu_indices(c, 1)].mean()
    if mean_dist > 0:
        means *= sep / mean_dist
    return means


def synth_dataset(n, d, c, sep, label_noise, seed):
    """Generate c isotropic Gaussian clusters with one-hot (optionally noisy) aux labels.

    Returns (features, aux, truth) where truth holds the clean cluster one-hots.
    """
    if c < 1 or n < c:
        raise ParameterError(f"need n >= c >= 1, got n={n}, c={c}")
    if d < 1:
        raise ParameterError(f"need d >= 1, got d={d}")
    if sep < 0:
        raise ParameterError(f"need sep >= 0, got {sep}")
    if not 0.0 <= label_noise <= 1.0:
        raise ParameterError(f"label_noise must be in [0,1], got {label_noise}")
    rng = np.random.default_rng(seed)
    means = _cluster_means(c, d, sep, rng)
    assign = rng.integers(0, c, size=n)
    X = means[assign].T + rng.standard_normal((d, n))
    truth = np.zeros((c, n))
    truth[assign, np.arange(n)] = 1.0
    flips = rng.random((c, n)) < label_noise
    aux = np.abs(truth - flips.astype(np.float64))
    names = default_ids(c, prefix="cluster")
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")  # noisy flips may zero out a column
        aux_sem = AuxSemantics(aux, names)
    return (
        FeatureMatrix(X, default_ids(n)),
        aux_sem,
        AuxSemantics(truth, names),
    )


def make_split(n, sizes, seed, include_train_in_retrieval=True):
    """Random disjoint train/query split; retrieval is the complement of query.

    By default training items stay in the retrieval set; pass
    include_train_in_retrieval=False to exclude them.
    """
    train_sz, query_sz = sizes
    if train_sz < 0 or query_sz < 0:
        raise ParameterError(f"split sizes must be nonnegative, got {sizes}")
    if train_sz + query_sz > n:
        raise ParameterError(f"train+query = {train_sz + query_sz} exceeds n = {n}")
    rng = np.random.default_rng(seed)
    perm = rng.permutation(n)
    train = np.sort(perm[:train_sz])
    query = np.sort(perm[train_sz:train_sz + query_sz])
    drop = query if include_train_in_retrieval else np.concatenate([query, train])
    retrieval = np.setdiff1d(np.arange(n), drop)
    return DatasetSplit(train, query, retrieval)
