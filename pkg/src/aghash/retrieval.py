"""Packed binary codes, Hamming ranking, and MAP / topK-precision evaluation."""

import json
import time
import warnings
from dataclasses import dataclass

import numpy as np

from .data import default_ids
from .errors import DataError, FormatError, ParameterError, ShapeError

_WORD_BITS = 64

try:
    _popcount_u64 = np.bitwise_count  # numpy >= 2.0
except AttributeError:  # pragma: no cover - fallback for older numpy
    _BYTE_POPCOUNT = np.array([bin(i).count("1") for i in range(256)], dtype=np.uint8)

    def _popcount_u64(words):
        by = np.ascontiguousarray(words).view(np.uint8)
        return _BYTE_POPCOUNT[by].reshape(*words.shape, 8).sum(axis=-1).astype(np.uint64)


@dataclass(frozen=True)
class HashCodes:
    """n x ceil(r/64) packed codes; bit 1 encodes +1."""

    packed: np.ndarray
    r: int
    item_ids: list

    def __post_init__(self):
        packed = np.ascontiguousarray(self.packed, dtype=np.uint64)
        words = (self.r + _WORD_BITS - 1) // _WORD_BITS
        if packed.ndim != 2 or packed.shape[1] != words:
            raise ShapeError(f"packed array is {packed.shape}, expected (n, {words})")
        spare = words * _WORD_BITS - self.r
        if spare and packed.size:
            if np.any(packed[:, -1] >> np.uint64(_WORD_BITS - spare)):
                raise DataError("unused high bits of the last word must be zero")
        ids = list(self.item_ids)
        if len(ids) != packed.shape[0]:
            raise ShapeError(f"{len(ids)} item ids for {packed.shape[0]} codes")
        packed.setflags(write=False)
        object.__setattr__(self, "packed", packed)
        object.__setattr__(self, "item_ids", ids)

    @property
    def n(self):
        return self.packed.shape[0]


@dataclass(frozen=True)
class EvalReport:
    map_at_k: float
    precision_curve: list  # [(K, precision), ...] with strictly increasing K
    per_query_ap: list
    timing: dict


def pack(B, item_ids=None):
    """Pack an r x n matrix over {-1,+1} (columns are items)."""
    B = np.asarray(B)
    if B.ndim != 2:
        raise ShapeError(f"expected an r x n matrix, got shape {B.shape}")
    if not np.all(np.abs(B) == 1):
        raise DataError("code entries must be -1 or +1")
    r, n = B.shape
    words = (r + _WORD_BITS - 1) // _WORD_BITS
    bits = np.zeros((n, words * _WORD_BITS), dtype=np.uint8)
    bits[:, :r] = (B.T > 0)
    packed = np.packbits(bits, axis=1, bitorder="little").view(np.uint64)
    if item_ids is None:
        item_ids = default_ids(n)
    return HashCodes(packed=packed, r=r, item_ids=item_ids)


def unpack(codes):
    """Inverse of pack: r x n matrix over {-1,+1}."""
    bits = np.unpackbits(codes.packed.view(np.uint8), axis=1, bitorder="little")
    return np.where(bits[:, :codes.r].T > 0, 1.0, -1.0)


def hamming(a, b):
    """Number of differing bits between two packed code rows."""
    a = np.asarray(a, dtype=np.uint64).ravel()
    b = np.asarray(b, dtype=np.uint64).ravel()
    if a.shape != b.shape:
        raise ShapeError(f"code word counts differ: {a.shape} vs {b.shape}")
    return int(_popcount_u64(a ^ b).sum())


def hamming_to_all(query_words, db):
    """Hamming distance from one packed code to every row of a HashCodes db."""
    x = db.packed ^ np.asarray(query_words, dtype=np.uint64)[None, :]
    return _popcount_u64(x).sum(axis=1).astype(np.int64)


def rank(query_words, db):
    """Db indices by ascending Hamming distance, ties broken by item index."""
    dist = hamming_to_all(query_words, db)
    return np.argsort(dist, kind="stable")


def average_precision(ranking, relevance, K, denominator="min"):
    """AP@K with denominator min(R, K) ('min') or the full relevant count R ('full')."""
    relevance = np.asarray(relevance)
    ranking = np.asarray(ranking)
    if relevance.shape[0] != ranking.shape[0]:
        raise ShapeError(f"relevance length {relevance.shape[0]} != db size {ranking.shape[0]}")
    if K < 1:
        raise ParameterError(f"K must be >= 1, got {K}")
    R = int(relevance.sum())
    if R == 0:
        return 0.0
    top = relevance[ranking[:K]].astype(np.float64)
    prec = np.cumsum(top) / np.arange(1, top.size + 1)
    denom = min(R, K) if denominator == "min" else R
    return float((prec * top).sum() / denom)


def evaluate(query_codes, db_codes, query_labels, db_labels, K=1000,
             curve_points=(1, 5, 10, 50, 100, 500, 1000), denominator="min"):
    """MAP@K and topK-precision. Items are relevant iff their labels share a category.

    Labels are c x n matrices; K and curve points beyond the db size are
    clamped with a warning.
    """
    if query_codes.n == 0:
        raise ParameterError("query set is empty")
    if query_codes.r != db_codes.r:
        raise ShapeError(f"code lengths differ: {query_codes.r} vs {db_codes.r}")
    query_labels = np.asarray(query_labels, dtype=np.float64)
    db_labels = np.asarray(db_labels, dtype=np.float64)
    if query_labels.shape[0] != db_labels.shape[0]:
        raise ShapeError("query and db label matrices must share the category count")
    if query_labels.shape[1] != query_codes.n or db_labels.shape[1] != db_codes.n:
        raise ShapeError("label column counts must match code counts")

    n_db = db_codes.n
    if K > n_db:
        warnings.warn(f"K={K} exceeds database size {n_db}; clamping", stacklevel=2)
        K = n_db
    points = sorted({min(int(k), n_db) for k in curve_points if k >= 1})
    if not points:
        raise ParameterError("curve_points must contain at least one K >= 1")

    start = time.perf_counter()
    aps = []
    prec_sums = np.zeros(len(points))
    for qi in range(query_codes.n):
        order = rank(query_codes.packed[qi], db_codes)
        rel = (query_labels[:, qi] @ db_labels) >= 1.0
        aps.append(average_precision(order, rel, K, denominator=denominator))
        rel_ranked = rel[order]
        for pi, kk in enumerate(points):
            prec_sums[pi] += rel_ranked[:kk].mean()
    elapsed = time.perf_counter() - start

    curve = [(kk, float(prec_sums[pi] / query_codes.n)) for pi, kk in enumerate(points)]
    return EvalReport(
        map_at_k=float(np.mean(aps)),
        precision_curve=curve,
        per_query_ap=aps,
        timing={"evaluate_seconds": elapsed},
    )


# ---------------------------------------------------------------------------
# file formats: codes as "n r" header + hex words per item; reports as JSON
# plus a "K,precision" CSV for the curve.
# ---------------------------------------------------------------------------


def save_codes(path, codes):
    with open(path, "w", encoding="ascii") as fh:
        fh.write(f"{codes.n} {codes.r}\n")
        for row in codes.packed:
            fh.write(" ".join(f"{int(w):016x}" for w in row) + "\n")


def load_codes(path):
    with open(path, "r", encoding="ascii") as fh:
        lines = [ln.strip() for ln in fh if ln.strip()]
    if not lines:
        raise FormatError(f"{path}: file is empty")
    parts = lines[0].split()
    if len(parts) != 2:
        raise FormatError(f"{path}: header must be 'n r'")
    try:
        n, r = int(parts[0]), int(parts[1])
    except ValueError as exc:
        raise FormatError(f"{path}: non-integer header") from exc
    if len(lines) - 1 != n:
        raise ShapeError(f"{path}: header declares {n} codes, found {len(lines) - 1}")
    words = (r + _WORD_BITS - 1) // _WORD_BITS
    packed = np.zeros((n, words), dtype=np.uint64)
    for i, line in enumerate(lines[1:]):
        toks = line.split()
        if len(toks) != words:
            raise ShapeError(f"{path}: row {i} has {len(toks)} words, expected {words}")
        try:
            packed[i] = [int(t, 16) for t in toks]
        except ValueError as exc:
            raise FormatError(f"{path}: bad hex word in row {i}") from exc
    return HashCodes(packed=packed, r=r, item_ids=default_ids(n))


def save_report(json_path, curve_path, report):
    payload = {
        "map_at_k": report.map_at_k,
        "precision_curve": [[k, p] for k, p in report.precision_curve],
        "per_query_ap": report.per_query_ap,
        "timing": report.timing,
    }
    with open(json_path, "w", encoding="ascii") as fh:
        json.dump(payload, fh, indent=2)
        fh.write("\n")
    with open(curve_path, "w", encoding="ascii") as fh:
        fh.write("K,precision\n")
        for k, p in report.precision_curve:
            fh.write(f"{k},{p:.10g}\n")
