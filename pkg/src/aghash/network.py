"""Two-layer GCN generator, three-layer discriminator, classification head.

Forward passes only; gradients live in `objective`.
"""

import io
import json
import struct
from dataclasses import dataclass

import numpy as np

from .errors import FormatError, ShapeError

CHECKPOINT_MAGIC = b"AGCK"
CHECKPOINT_VERSION = 1


@dataclass
class GcnParams:
    W1: np.ndarray  # h x d'
    W2: np.ndarray  # r x h

    @property
    def h(self):
        return self.W1.shape[0]

    @property
    def r(self):
        return self.W2.shape[0]


@dataclass
class DiscParams:
    A1: np.ndarray  # 64 x r
    b1: np.ndarray
    A2: np.ndarray  # 32 x 64
    b2: np.ndarray
    A3: np.ndarray  # 1 x 32
    b3: np.ndarray  # scalar (shape (1,))


@dataclass
class ClsHead:
    Wc: np.ndarray  # c x r


@dataclass
class DecoderParams:
    # linear decoder reconstructing attentive features from codes
    Wd: np.ndarray  # d' x r


def init_params(d_prime, h, r, c, seed, disc_h1=64, disc_h2=32):
    """He-style init: Gaussian entries with std sqrt(2/fan_in), zero biases."""
    if min(d_prime, h, r, c) < 1:
        raise ShapeError("all dimensions must be >= 1")
    rng = np.random.default_rng(seed)

    def mat(rows, cols):
        return rng.standard_normal((rows, cols)) * np.sqrt(2.0 / cols)

    gcn = GcnParams(W1=mat(h, d_prime), W2=mat(r, h))
    disc = DiscParams(
        A1=mat(disc_h1, r), b1=np.zeros(disc_h1),
        A2=mat(disc_h2, disc_h1), b2=np.zeros(disc_h2),
        A3=mat(1, disc_h2), b3=np.zeros(1),
    )
    head = ClsHead(Wc=mat(c, r))
    return gcn, disc, head


def init_decoder(d_prime, r, seed):
    rng = np.random.default_rng(seed)
    return DecoderParams(Wd=rng.standard_normal((d_prime, r)) * np.sqrt(2.0 / r))


def relu(x):
    return np.maximum(x, 0.0)


def sigmoid(x):
    out = np.empty_like(x, dtype=np.float64)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def gcn_forward(Xatt, S_tilde, params):
    """Z1 = ReLU(W1 Xatt S~); Z = W2 Z1 S~ (no activation on layer 2)."""
    if params.W1.shape[1] != Xatt.shape[0]:
        raise ShapeError(f"W1 is {params.W1.shape}, features have d' = {Xatt.shape[0]}")
    if S_tilde.shape != (Xatt.shape[1], Xatt.shape[1]):
        raise ShapeError(f"graph is {S_tilde.shape}, expected {(Xatt.shape[1],) * 2}")
    Z1 = relu(params.W1 @ (Xatt @ S_tilde))
    Z = params.W2 @ (Z1 @ S_tilde)
    return Z1, Z


def disc_forward(v, params):
    """Probability that the input is a prior sample. Accepts r-vector or r x m batch."""
    V = np.asarray(v, dtype=np.float64)
    single = V.ndim == 1
    if single:
        V = V[:, None]
    if V.shape[0] != params.A1.shape[1]:
        raise ShapeError(f"discriminator expects inputs of length {params.A1.shape[1]}, got {V.shape[0]}")
    h1 = relu(params.A1 @ V + params.b1[:, None])
    h2 = relu(params.A2 @ h1 + params.b2[:, None])
    logits = (params.A3 @ h2 + params.b3[:, None])[0]
    probs = sigmoid(logits)
    return float(probs[0]) if single else probs


def cls_forward(Z, head):
    """Per-category probabilities sigmoid(Wc z_i)."""
    if head.Wc.shape[1] != Z.shape[0]:
        raise ShapeError(f"head is {head.Wc.shape}, codes have r = {Z.shape[0]}")
    return sigmoid(head.Wc @ Z)


# ---------------------------------------------------------------------------
# checkpoint container: deterministic versioned binary format
#
# header: magic, version, meta length, meta JSON (utf-8); then array count and
# per array: name, dtype string, ndim, dims, raw little-endian C-order bytes.
# ---------------------------------------------------------------------------


def _write_str(fh, s):
    raw = s.encode("utf-8")
    fh.write(struct.pack("<I", len(raw)))
    fh.write(raw)


def _read_exact(fh, size, path):
    raw = fh.read(size)
    if len(raw) != size:
        raise FormatError(f"{path}: truncated checkpoint")
    return raw


def _read_str(fh, path):
    (length,) = struct.unpack("<I", _read_exact(fh, 4, path))
    return _read_exact(fh, length, path).decode("utf-8")


def save_arrays(path, arrays, meta=None):
    """Write named float arrays plus a JSON metadata blob; byte-deterministic."""
    buf = io.BytesIO()
    buf.write(CHECKPOINT_MAGIC)
    buf.write(struct.pack("<I", CHECKPOINT_VERSION))
    _write_str(buf, json.dumps(meta or {}, sort_keys=True))
    buf.write(struct.pack("<I", len(arrays)))
    for name in sorted(arrays):
        arr = np.ascontiguousarray(arrays[name])
        _write_str(buf, name)
        _write_str(buf, arr.dtype.str)
        buf.write(struct.pack("<I", arr.ndim))
        buf.write(struct.pack(f"<{arr.ndim}Q", *arr.shape))
        buf.write(arr.tobytes())
    with open(path, "wb") as fh:
        fh.write(buf.getvalue())


def load_arrays(path):
    """Inverse of save_arrays: returns (arrays dict, meta dict)."""
    with open(path, "rb") as fh:
        if _read_exact(fh, 4, path) != CHECKPOINT_MAGIC:
            raise FormatError(f"{path}: not a checkpoint file")
        (version,) = struct.unpack("<I", _read_exact(fh, 4, path))
        if version != CHECKPOINT_VERSION:
            raise FormatError(f"{path}: unsupported checkpoint version {version}")
        meta = json.loads(_read_str(fh, path))
        (count,) = struct.unpack("<I", _read_exact(fh, 4, path))
        arrays = {}
        for _ in range(count):
            name = _read_str(fh, path)
            dtype = np.dtype(_read_str(fh, path))
            (ndim,) = struct.unpack("<I", _read_exact(fh, 4, path))
            shape = struct.unpack(f"<{ndim}Q", _read_exact(fh, 8 * ndim, path))
            data = _read_exact(fh, dtype.itemsize * int(np.prod(shape, dtype=np.int64)), path)
            arrays[name] = np.frombuffer(data, dtype=dtype).reshape(shape).copy()
    return arrays, meta
