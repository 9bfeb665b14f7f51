"""Shared test helpers: finite differences and small seeded model instances."""

from dataclasses import dataclass

import numpy as np

from aghash import attention as att
from aghash import graph as sg
from aghash import network as net
from aghash import objective as obj


def central_diff(f, P, eps=1e-4):
    """Central finite differences of scalar f over every entry of P."""
    P = np.asarray(P, dtype=np.float64)
    grad = np.zeros_like(P)
    flat = grad.ravel()
    base = P.ravel()
    for k in range(base.size):
        plus = base.copy()
        plus[k] += eps
        minus = base.copy()
        minus[k] -= eps
        flat[k] = (f(plus.reshape(P.shape)) - f(minus.reshape(P.shape))) / (2 * eps)
    return grad


def max_rel_err(analytic, numeric, floor=1e-7):
    analytic = np.asarray(analytic, dtype=np.float64)
    numeric = np.asarray(numeric, dtype=np.float64)
    scale = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), floor)
    return float((np.abs(analytic - numeric) / scale).max())


@dataclass
class SmallInstance:
    X: np.ndarray
    Y: np.ndarray
    apar: att.AttentionParams
    Xatt: np.ndarray
    Sa: np.ndarray
    St: np.ndarray
    gcn: net.GcnParams
    disc: net.DiscParams
    head: net.ClsHead
    prior: np.ndarray
    B: np.ndarray
    hp: obj.Hyperparams


def small_instance(seed, n=16, d=8, d_prime=8, h=8, r=4, c=3, hp=None):
    """Seeded instance at the gradient-suite dimensions."""
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((d, n))
    Y = (rng.random((c, n)) < 0.4).astype(np.float64)
    apar = att.init_attention(d, c, d_prime, seed + 1)
    Xatt, _, _, _ = att.denoise(X, Y, apar)
    Sa = sg.aux_similarity(Y)
    Sv, _ = sg.visual_similarity(Xatt)
    St = sg.normalize(sg.fuse(Sv, Sa, 1.0)).S_tilde
    gcn, disc, head = net.init_params(d_prime, h, r, c, seed + 2)
    prior = rng.standard_normal((r, n))
    _, Z = net.gcn_forward(Xatt, St, gcn)
    B = np.where(Z >= 0, 1.0, -1.0)
    return SmallInstance(X=X, Y=Y, apar=apar, Xatt=Xatt, Sa=Sa, St=St,
                         gcn=gcn, disc=disc, head=head, prior=prior, B=B,
                         hp=hp or obj.Hyperparams())
