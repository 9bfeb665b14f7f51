"""Loss terms and hand-derived reverse-mode gradients for the full model.

The generator objective is
    l_gen_adv + lambda1 * l_recons + lambda2 * l_quan + lambda3 * l_cl
and the discriminator minimizes the negated GAN value. All gradients are
exact (finite-difference checked) with subgradient 0 at ReLU/clip kinks.
"""

from dataclasses import dataclass, field

import numpy as np

from . import attention as att
from .errors import ParameterError, ShapeError
from .network import ClsHead, DecoderParams, DiscParams, GcnParams, cls_forward, relu, sigmoid

RECON_TARGETS = ("aux", "visual", "augmented", "inner-product", "feature")


@dataclass(frozen=True)
class Hyperparams:
    lambda1: float = 100.0
    lambda2: float = 1.0
    lambda3: float = 1.0
    k: float = 1.0
    recon_target: str = "aux"

    def __post_init__(self):
        if min(self.lambda1, self.lambda2, self.lambda3) < 0:
            raise ParameterError("tradeoff weights must be >= 0")
        if self.k <= 0:
            raise ParameterError(f"k must be > 0, got {self.k}")
        if self.recon_target not in RECON_TARGETS:
            raise ParameterError(f"unknown recon_target {self.recon_target!r}")


@dataclass(frozen=True)
class LossBreakdown:
    l_quan: float
    l_recons: float
    l_cl: float
    l_gen_adv: float
    l_disc: float
    total_gen: float


@dataclass
class Gradients:
    W1: np.ndarray
    W2: np.ndarray
    Wc: np.ndarray
    disc: DiscParams
    P_x: np.ndarray | None = None
    P_y: np.ndarray | None = None
    Wd: np.ndarray | None = None


def _softplus(x):
    return np.logaddexp(0.0, x)


# ---------------------------------------------------------------------------
# individual loss heads
# ---------------------------------------------------------------------------


def quantization_loss(B, Z):
    """Squared Frobenius gap ||B - Z||^2 with B treated as constant."""
    if B.shape != Z.shape:
        raise ShapeError(f"code shapes differ: {B.shape} vs {Z.shape}")
    diff = Z - B
    return float((diff**2).sum()), 2.0 * diff


def reconstruction_loss(Z, target, k, mode="cosine"):
    """||k*target - [cos(Z^T, Z)]_+||^2 (or raw Z^T Z in 'inner' mode).

    Cosine with a zero column is 0; the clip boundary takes subgradient 0.
    """
    n = Z.shape[1]
    if target.shape != (n, n):
        raise ShapeError(f"target is {target.shape}, expected {(n, n)}")
    if mode == "inner":
        R = k * target - Z.T @ Z
        G = -2.0 * R
        return float((R**2).sum()), Z @ (G + G.T)
    if mode != "cosine":
        raise ParameterError(f"unknown reconstruction mode {mode!r}")
    norms = np.sqrt((Z**2).sum(axis=0))
    safe = np.where(norms > 0, norms, 1.0)
    N = Z / safe
    N[:, norms == 0] = 0.0
    C = N.T @ N
    Cp = np.where(C > 0, C, 0.0)
    R = k * target - Cp
    loss = float((R**2).sum())
    dC = np.where(C > 0, -2.0 * R, 0.0)
    dN = N @ (dC + dC.T)
    dZ = (dN - N * (N * dN).sum(axis=0)) / safe
    dZ[:, norms == 0] = 0.0
    return loss, dZ


def feature_reconstruction_loss(Z, Xatt, decoder):
    """Linear-decoder feature reconstruction ||Xatt - Wd Z||^2."""
    if decoder.Wd.shape != (Xatt.shape[0], Z.shape[0]):
        raise ShapeError(f"decoder is {decoder.Wd.shape}, expected {(Xatt.shape[0], Z.shape[0])}")
    R = Xatt - decoder.Wd @ Z
    loss = float((R**2).sum())
    return loss, -2.0 * decoder.Wd.T @ R, -2.0 * R @ Z.T


def classification_loss(P, Y):
    """Binary cross-entropy (minimized negative log-likelihood) summed over entries.

    Returns the loss and its gradient w.r.t. the logits, P - Y.
    """
    if P.shape != Y.shape:
        raise ShapeError(f"probability/label shapes differ: {P.shape} vs {Y.shape}")
    Pc = np.clip(P, 1e-12, 1.0 - 1e-12)
    loss = -float((Y * np.log(Pc) + (1.0 - Y) * np.log(1.0 - Pc)).sum())
    return loss, P - Y


@dataclass
class GanResult:
    l_disc: float
    l_gen_adv: float
    disc_grads: DiscParams
    dZ: np.ndarray  # gradient of l_gen_adv w.r.t. the generator outputs


def _disc_pass(V, p):
    h1 = relu(p.A1 @ V + p.b1[:, None])
    h2 = relu(p.A2 @ h1 + p.b2[:, None])
    logits = (p.A3 @ h2 + p.b3[:, None])[0]
    return h1, h2, logits


def _disc_backward(V, h1, h2, dlogits, p):
    df = dlogits[None, :]
    dA3 = df @ h2.T
    db3 = df.sum(axis=1)
    dh2 = p.A3.T @ df
    da2 = dh2 * (h2 > 0)
    dA2 = da2 @ h1.T
    db2 = da2.sum(axis=1)
    dh1 = p.A2.T @ da2
    da1 = dh1 * (h1 > 0)
    dA1 = da1 @ V.T
    db1 = da1.sum(axis=1)
    dV = p.A1.T @ da1
    return DiscParams(A1=dA1, b1=db1, A2=dA2, b2=db2, A3=dA3, b3=db3), dV


def gan_losses(Z, prior_samples, disc, saturating=False):
    """Adversarial losses and gradients.

    Discriminator minimizes -mean log D(prior) - mean log(1 - D(Z)).
    Generator minimizes -mean log D(Z) by default; `saturating` selects the
    literal mean log(1 - D(Z)) form instead.
    """
    if Z.shape[0] != prior_samples.shape[0]:
        raise ShapeError(f"code length mismatch: {Z.shape[0]} vs {prior_samples.shape[0]}")
    m_fake, m_real = Z.shape[1], prior_samples.shape[1]
    h1r, h2r, f_real = _disc_pass(prior_samples, disc)
    h1f, h2f, f_fake = _disc_pass(Z, disc)
    D_real, D_fake = sigmoid(f_real), sigmoid(f_fake)

    l_disc = float(_softplus(-f_real).mean() + _softplus(f_fake).mean())
    g_real, _ = _disc_backward(prior_samples, h1r, h2r, (D_real - 1.0) / m_real, disc)
    g_fake, _ = _disc_backward(Z, h1f, h2f, D_fake / m_fake, disc)
    disc_grads = DiscParams(
        A1=g_real.A1 + g_fake.A1, b1=g_real.b1 + g_fake.b1,
        A2=g_real.A2 + g_fake.A2, b2=g_real.b2 + g_fake.b2,
        A3=g_real.A3 + g_fake.A3, b3=g_real.b3 + g_fake.b3,
    )

    if saturating:
        l_gen = -float(_softplus(f_fake).mean())
        dlog = -D_fake / m_fake
    else:
        l_gen = float(_softplus(-f_fake).mean())
        dlog = -(1.0 - D_fake) / m_fake
    _, dZ = _disc_backward(Z, h1f, h2f, dlog, disc)
    return GanResult(l_disc=l_disc, l_gen_adv=l_gen, disc_grads=disc_grads, dZ=dZ)


def total_generator_loss(l_gen_adv, l_recons, l_quan, l_cl, hp):
    return l_gen_adv + hp.lambda1 * l_recons + hp.lambda2 * l_quan + hp.lambda3 * l_cl


# ---------------------------------------------------------------------------
# full reverse pass
# ---------------------------------------------------------------------------


def backprop_all(
    Xatt,
    S_tilde,
    Y,
    B,
    gcn,
    disc,
    head,
    hp,
    prior_samples,
    *,
    recon_matrix=None,
    decoder=None,
    saturating=False,
    train_attention=False,
    attention_params=None,
    X_raw=None,
    Y_raw=None,
    H=None,
):
    """Losses plus exact gradients of the generator and discriminator objectives.

    `recon_matrix` is the n x n reconstruction target (ignored for the
    'feature' target, which uses `decoder`). When `train_attention` is set,
    Xatt is recomputed from (X_raw, Y_raw, attention_params) with the graph
    held fixed, and projection gradients are returned as well.

    Returns (LossBreakdown, Gradients, Z).
    """
    if train_attention:
        Xatt, _, _, _ = att.denoise(X_raw, Y_raw, attention_params)
        H = None
    if H is None:
        H = Xatt @ S_tilde
    A = gcn.W1 @ H
    Z1 = relu(A)
    M = Z1 @ S_tilde
    Z = gcn.W2 @ M

    l_quan, dZ_quan = quantization_loss(B, Z)
    dWd = None
    if hp.recon_target == "feature":
        if decoder is None:
            raise ParameterError("feature reconstruction requires decoder parameters")
        l_rec, dZ_rec, dWd = feature_reconstruction_loss(Z, Xatt, decoder)
    else:
        mode = "inner" if hp.recon_target == "inner-product" else "cosine"
        if recon_matrix is None:
            raise ParameterError(f"recon_target {hp.recon_target!r} requires a target matrix")
        l_rec, dZ_rec = reconstruction_loss(Z, recon_matrix, hp.k, mode=mode)
    P = cls_forward(Z, head)
    l_cl, dlogits = classification_loss(P, Y)
    dWc = dlogits @ Z.T
    dZ_cl = head.Wc.T @ dlogits
    gan = gan_losses(Z, prior_samples, disc, saturating=saturating)

    total = total_generator_loss(gan.l_gen_adv, l_rec, l_quan, l_cl, hp)
    dZ = gan.dZ + hp.lambda1 * dZ_rec + hp.lambda2 * dZ_quan + hp.lambda3 * dZ_cl
    if dWd is not None:
        dWd = hp.lambda1 * dWd

    dW2 = dZ @ M.T
    dZ1 = (gcn.W2.T @ dZ) @ S_tilde
    dA = dZ1 * (Z1 > 0)
    dW1 = dA @ H.T
    grads = Gradients(W1=dW1, W2=dW2, Wc=hp.lambda3 * dWc, disc=gan.disc_grads, Wd=dWd)

    if train_attention:
        dXatt = (gcn.W1.T @ dA) @ S_tilde
        if hp.recon_target == "feature":
            # Xatt also enters the decoder residual directly
            dXatt = dXatt + hp.lambda1 * 2.0 * (Xatt - decoder.Wd @ Z)
        grads.P_x, grads.P_y = att.attention_grads(X_raw, Y_raw, attention_params, dXatt)

    breakdown = LossBreakdown(
        l_quan=l_quan, l_recons=l_rec, l_cl=l_cl,
        l_gen_adv=gan.l_gen_adv, l_disc=gan.l_disc, total_gen=total,
    )
    return breakdown, grads, Z
