"""Augmented semantic graph: visual + auxiliary similarity, fusion, normalization."""

import warnings
from dataclasses import dataclass

import numpy as np

from .errors import ParameterError, ShapeError

VARIANTS = ("augmented", "visual-only", "aux-only")


@dataclass(frozen=True)
class GraphConfig:
    mu: float = 1.0
    bandwidth: float | None = None  # None -> median heuristic
    variant: str = "augmented"

    def __post_init__(self):
        if self.mu < 0:
            raise ParameterError(f"mu must be >= 0, got {self.mu}")
        if self.bandwidth is not None and self.bandwidth <= 0:
            raise ParameterError(f"fixed bandwidth must be > 0, got {self.bandwidth}")
        if self.variant not in VARIANTS:
            raise ParameterError(f"unknown graph variant {self.variant!r}")


@dataclass(frozen=True)
class SemanticGraph:
    S: np.ndarray
    S_tilde: np.ndarray
    degrees: np.ndarray


def pairwise_sqdist(X):
    """Squared Euclidean distances between columns of X, clipped at 0."""
    sq = (X**2).sum(axis=0)
    d2 = sq[:, None] + sq[None, :] - 2.0 * (X.T @ X)
    return np.maximum(d2, 0.0)


def median_bandwidth(X):
    """Median pairwise distance between columns; falls back to 1 when degenerate."""
    n = X.shape[1]
    if n < 2:
        raise ParameterError("median heuristic needs at least 2 items")
    d2 = pairwise_sqdist(X)
    dists = np.sqrt(d2[np.triu_indices(n, 1)])
    sigma = float(np.median(dists))
    if sigma == 0.0:
        warnings.warn("all items identical; falling back to bandwidth 1", stacklevel=2)
        sigma = 1.0
    return sigma


def visual_similarity(Xatt, bandwidth=None):
    """Gaussian-kernel similarity of attentive features; unit diagonal.

    bandwidth=None selects the median heuristic over pairwise distances.
    Returns (S_v, sigma) with the bandwidth actually used.
    """
    sigma = median_bandwidth(Xatt) if bandwidth is None else float(bandwidth)
    if sigma <= 0:
        raise ParameterError(f"bandwidth must be > 0, got {sigma}")
    Sv = np.exp(-pairwise_sqdist(Xatt) / (2.0 * sigma**2))
    np.fill_diagonal(Sv, 1.0)
    return Sv, sigma


def aux_similarity(Y):
    """Integer-valued shared-category counts y_i . y_j."""
    Y = np.asarray(Y, dtype=np.float64)
    return Y.T @ Y


def fuse(Sv, Sa, mu):
    """Augmented graph mu * S_v + S_a."""
    if Sv.shape != Sa.shape:
        raise ShapeError(f"similarity shapes differ: {Sv.shape} vs {Sa.shape}")
    return mu * Sv + Sa


def normalize(S):
    """Symmetric normalization D^{-1/2} S D^{-1/2}; zero-degree rows stay zero."""
    S = np.asarray(S, dtype=np.float64)
    if S.ndim != 2 or S.shape[0] != S.shape[1]:
        raise ShapeError(f"graph must be square, got {S.shape}")
    if not np.allclose(S, S.T, rtol=1e-10, atol=1e-12):
        raise ParameterError("graph must be symmetric")
    if S.min() < 0:
        raise ParameterError("graph must be nonnegative")
    degrees = S.sum(axis=1)
    inv_sqrt = np.where(degrees > 0, 1.0 / np.sqrt(np.where(degrees > 0, degrees, 1.0)), 0.0)
    S_tilde = S * inv_sqrt[:, None] * inv_sqrt[None, :]
    return SemanticGraph(S=S, S_tilde=S_tilde, degrees=degrees)


def build_graph(Xatt, Y, config):
    """Variant-aware construction. Returns (SemanticGraph, sigma_used).

    sigma is None for the aux-only variant (no visual kernel involved).
    """
    if config.variant == "aux-only":
        S = aux_similarity(Y)
        return normalize(S), None
    Sv, sigma = visual_similarity(Xatt, config.bandwidth)
    if config.variant == "visual-only":
        S = Sv  # scale cancels under normalization, so mu is irrelevant here
    else:
        S = fuse(Sv, aux_similarity(Y), config.mu)
    return normalize(S), sigma


def save_graph(path, S):
    """Debug/oracle export: first line n, then n comma-separated rows."""
    with open(path, "w", encoding="ascii") as fh:
        fh.write(f"{S.shape[0]}\n")
        for row in S:
            fh.write(",".join(f"{v:.12g}" for v in row) + "\n")
