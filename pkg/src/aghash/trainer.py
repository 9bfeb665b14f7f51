"""Adam training loop alternating discriminator and generator updates.

Training is full-batch over the training split: the graph layers consume the
whole n x n normalized graph, which is tractable at the target scale. The
`batch` field is informational only.
"""

from dataclasses import dataclass, field, replace

import numpy as np

from . import attention as att
from . import graph as sg
from . import network as net
from . import objective as obj
from . import retrieval
from .errors import NumericError, ParameterError, ShapeError


@dataclass(frozen=True)
class TrainConfig:
    lr: float = 1e-4
    epochs: int = 300
    batch: int | None = None  # informational; training is full-batch
    seed: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    disc_steps: int = 1
    saturating: bool = False
    train_attention: bool = False

    def __post_init__(self):
        if self.lr <= 0:
            raise ParameterError(f"learning rate must be > 0, got {self.lr}")
        if self.epochs < 1:
            raise ParameterError(f"epochs must be >= 1, got {self.epochs}")
        if self.disc_steps < 1:
            raise ParameterError(f"disc_steps must be >= 1, got {self.disc_steps}")


@dataclass
class AdamState:
    m: np.ndarray
    v: np.ndarray
    t: int = 0

    @classmethod
    def like(cls, param):
        return cls(m=np.zeros_like(param), v=np.zeros_like(param))


def adam_step(param, grad, state, lr, beta1=0.9, beta2=0.999, eps=1e-8):
    """One bias-corrected Adam update; mutates state, returns the new parameter."""
    if param.shape != grad.shape or param.shape != state.m.shape:
        raise ShapeError(f"shape mismatch: param {param.shape}, grad {grad.shape}, state {state.m.shape}")
    state.t += 1
    state.m = beta1 * state.m + (1.0 - beta1) * grad
    state.v = beta2 * state.v + (1.0 - beta2) * grad**2
    m_hat = state.m / (1.0 - beta1**state.t)
    v_hat = state.v / (1.0 - beta2**state.t)
    return param - lr * m_hat / (np.sqrt(v_hat) + eps)


def sign_pm(Z):
    """Elementwise sign into {-1, +1} with sgn(0) := +1."""
    return np.where(Z >= 0, 1.0, -1.0)


@dataclass
class TrainedModel:
    attention: att.AttentionParams
    gcn: net.GcnParams
    disc: net.DiscParams
    head: net.ClsHead
    decoder: net.DecoderParams | None
    graph_cfg: sg.GraphConfig
    hyper: obj.Hyperparams
    train_cfg: TrainConfig
    use_attention: bool
    sigma: float | None  # resolved visual-kernel bandwidth
    xatt_train: np.ndarray  # d' x n
    z1_train: np.ndarray  # h x n
    z_train: np.ndarray  # r x n
    degrees: np.ndarray  # length n
    y_train: np.ndarray  # c x n

    @property
    def r(self):
        return self.gcn.r


def _recon_matrix(target, Sa, Sv, S):
    if target == "aux" or target == "inner-product":
        return Sa
    if target == "visual":
        return Sv
    if target == "augmented":
        return S
    return None  # feature target uses the decoder


def _attentive(X, Y, params, use_attention):
    if use_attention:
        Xatt, _, _, _ = att.denoise(X, Y, params)
        return Xatt
    Xbar, _ = att.project(X, Y, params)
    return Xbar


def fit(
    features,
    aux,
    train_idx,
    *,
    r=32,
    d_prime=512,
    hidden=1024,
    graph_cfg=sg.GraphConfig(),
    hyper=obj.Hyperparams(),
    cfg=TrainConfig(),
    use_attention=True,
    epoch_callback=None,
):
    """Train the full model on the given split. Returns (TrainedModel, history).

    history is one LossBreakdown per epoch. epoch_callback(epoch, breakdown)
    is invoked after each epoch when given.
    """
    train_idx = np.asarray(train_idx, dtype=np.int64)
    if train_idx.size == 0:
        raise ParameterError("training split is empty")
    if features.n != aux.n:
        raise ShapeError(f"features have {features.n} items, aux has {aux.n}")
    X = features.data[:, train_idx]
    Yt = np.ascontiguousarray(aux.data[:, train_idx])
    n = train_idx.size

    apar = att.init_attention(features.d, aux.c, d_prime, cfg.seed)
    Xatt = _attentive(X, Yt, apar, use_attention)

    Sa = sg.aux_similarity(Yt)
    if graph_cfg.variant == "aux-only" and hyper.recon_target not in ("visual", "augmented"):
        Sv, sigma = None, None
    else:
        Sv, sigma = sg.visual_similarity(Xatt, graph_cfg.bandwidth)
    if graph_cfg.variant == "aux-only":
        S = Sa
    elif graph_cfg.variant == "visual-only":
        S = Sv
    else:
        S = sg.fuse(Sv, Sa, graph_cfg.mu)
    graph = sg.normalize(S)
    St = graph.S_tilde
    recon = _recon_matrix(hyper.recon_target, Sa, Sv, S)

    gcn, disc, head = net.init_params(d_prime, hidden, r, aux.c, cfg.seed + 1)
    decoder = net.init_decoder(d_prime, r, cfg.seed + 3) if hyper.recon_target == "feature" else None
    rng = np.random.default_rng(cfg.seed + 2)

    states = {
        "W1": AdamState.like(gcn.W1), "W2": AdamState.like(gcn.W2), "Wc": AdamState.like(head.Wc),
        "A1": AdamState.like(disc.A1), "b1": AdamState.like(disc.b1),
        "A2": AdamState.like(disc.A2), "b2": AdamState.like(disc.b2),
        "A3": AdamState.like(disc.A3), "b3": AdamState.like(disc.b3),
    }
    if decoder is not None:
        states["Wd"] = AdamState.like(decoder.Wd)
    if cfg.train_attention:
        states["P_x"] = AdamState.like(apar.P_x)
        states["P_y"] = AdamState.like(apar.P_y)

    def step(name, param, grad):
        return adam_step(param, grad, states[name], cfg.lr, cfg.beta1, cfg.beta2, cfg.eps)

    H = Xatt @ St
    history = []
    for epoch in range(1, cfg.epochs + 1):
        A = gcn.W1 @ H
        Z1 = net.relu(A)
        M = Z1 @ St
        Z = gcn.W2 @ M
        if not np.all(np.isfinite(Z)):
            raise NumericError(f"non-finite generator output at epoch {epoch}")
        B = sign_pm(Z)
        prior = rng.standard_normal((r, n))

        for _ in range(cfg.disc_steps):
            gan = obj.gan_losses(Z, prior, disc, saturating=cfg.saturating)
            g = gan.disc_grads
            disc = net.DiscParams(
                A1=step("A1", disc.A1, g.A1), b1=step("b1", disc.b1, g.b1),
                A2=step("A2", disc.A2, g.A2), b2=step("b2", disc.b2, g.b2),
                A3=step("A3", disc.A3, g.A3), b3=step("b3", disc.b3, g.b3),
            )

        breakdown, grads, _ = obj.backprop_all(
            Xatt, St, Yt, B, gcn, disc, head, hyper, prior,
            recon_matrix=recon, decoder=decoder, saturating=cfg.saturating,
            train_attention=cfg.train_attention, attention_params=apar,
            X_raw=X if cfg.train_attention else None,
            Y_raw=Yt if cfg.train_attention else None,
            H=None if cfg.train_attention else H,
        )
        for fname, value in (
            ("l_quan", breakdown.l_quan), ("l_recons", breakdown.l_recons),
            ("l_cl", breakdown.l_cl), ("l_gen_adv", breakdown.l_gen_adv),
            ("l_disc", breakdown.l_disc),
        ):
            if not np.isfinite(value):
                raise NumericError(f"non-finite loss term {fname} at epoch {epoch}")

        gcn = net.GcnParams(W1=step("W1", gcn.W1, grads.W1), W2=step("W2", gcn.W2, grads.W2))
        head = net.ClsHead(Wc=step("Wc", head.Wc, grads.Wc))
        if decoder is not None:
            decoder = net.DecoderParams(Wd=step("Wd", decoder.Wd, grads.Wd))
        if cfg.train_attention:
            apar = att.AttentionParams(
                P_x=step("P_x", apar.P_x, grads.P_x),
                P_y=step("P_y", apar.P_y, grads.P_y),
            )
            Xatt = _attentive(X, Yt, apar, use_attention)
            H = Xatt @ St
        history.append(breakdown)
        if epoch_callback is not None:
            epoch_callback(epoch, breakdown)

    Z1, Z = net.gcn_forward(Xatt, St, gcn)
    model = TrainedModel(
        attention=apar, gcn=gcn, disc=disc, head=head, decoder=decoder,
        graph_cfg=graph_cfg, hyper=hyper, train_cfg=cfg, use_attention=use_attention,
        sigma=sigma, xatt_train=Xatt, z1_train=Z1, z_train=Z,
        degrees=graph.degrees, y_train=Yt,
    )
    return model, history


def forward_train(model):
    """Rebuild the training graph from cached tensors and rerun the GCN."""
    cfg = model.graph_cfg
    if cfg.variant == "aux-only":
        S = sg.aux_similarity(model.y_train)
    else:
        Sv, _ = sg.visual_similarity(model.xatt_train, model.sigma)
        if cfg.variant == "visual-only":
            S = Sv
        else:
            S = sg.fuse(Sv, sg.aux_similarity(model.y_train), cfg.mu)
    graph = sg.normalize(S)
    return net.gcn_forward(model.xatt_train, graph.S_tilde, model.gcn)


def encode_train(model, item_ids=None):
    """Packed codes for the training items: sgn of the cached GCN outputs."""
    return retrieval.pack(sign_pm(model.z_train), item_ids=item_ids)


def encode_queries(model, Xq, Yq):
    """Inductive codes for out-of-sample items, given d x m features and c x m aux.

    Each query gets a one-column extension of the training graph (with an
    explicit self term), is normalized against the cached training degrees,
    and is propagated through both GCN layers.
    """
    Xq = np.asarray(Xq, dtype=np.float64)
    Yq = np.asarray(Yq, dtype=np.float64)
    if Xq.ndim != 2 or Xq.shape[0] != model.attention.P_x.shape[1]:
        raise ShapeError(f"queries must be d x m with d = {model.attention.P_x.shape[1]}")
    if Yq.shape != (model.y_train.shape[0], Xq.shape[1]):
        raise ShapeError(f"query aux must be {model.y_train.shape[0]} x {Xq.shape[1]}, got {Yq.shape}")

    if model.use_attention:
        Ybar_train = model.attention.P_y @ model.y_train
        xbar = model.attention.P_x @ Xq
        alpha = att.attention_scores(xbar, Ybar_train)
        w = alpha.sum(axis=1)
        safe = np.where(w > 0, w, 1.0)
        mix = (Ybar_train @ alpha.T) / safe
        mix[:, w == 0] = 0.0
        xatt_q = mix + xbar
    else:
        xatt_q = model.attention.P_x @ Xq

    variant = model.graph_cfg.variant
    mu = model.graph_cfg.mu
    if variant != "aux-only":
        sq_dist = (
            (xatt_q**2).sum(axis=0)[:, None]
            + (model.xatt_train**2).sum(axis=0)[None, :]
            - 2.0 * xatt_q.T @ model.xatt_train
        )
        vis = np.exp(-np.maximum(sq_dist, 0.0) / (2.0 * model.sigma**2))
    aux_col = Yq.T @ model.y_train
    self_aux = (Yq**2).sum(axis=0)
    if variant == "augmented":
        s_col = mu * vis + aux_col
        s_self = mu + self_aux
    elif variant == "visual-only":
        s_col = vis
        s_self = np.ones(Xq.shape[1])
    else:
        s_col = aux_col
        s_self = self_aux

    d_q = s_col.sum(axis=1) + s_self
    safe_dq = np.where(d_q > 0, d_q, 1.0)
    inv_deg = np.where(model.degrees > 0, 1.0 / np.sqrt(np.where(model.degrees > 0, model.degrees, 1.0)), 0.0)
    st_col = s_col / np.sqrt(safe_dq)[:, None] * inv_deg[None, :]
    st_col[d_q == 0, :] = 0.0
    st_self = np.where(d_q > 0, s_self / safe_dq, 0.0)

    z1_q = net.relu(model.gcn.W1 @ (model.xatt_train @ st_col.T + xatt_q * st_self))
    z_q = model.gcn.W2 @ (model.z1_train @ st_col.T + z1_q * st_self)
    return sign_pm(z_q)


def encode_query(model, x_q, y_q):
    """Code for a single out-of-sample item. Returns a length-r vector in {-1, +1}."""
    codes = encode_queries(model, np.asarray(x_q, dtype=np.float64)[:, None],
                           np.asarray(y_q, dtype=np.float64)[:, None])
    return codes[:, 0]


# ---------------------------------------------------------------------------
# persistence
# ---------------------------------------------------------------------------


def write_train_log(path, history):
    with open(path, "w", encoding="ascii") as fh:
        fh.write("epoch,l_quan,l_recons,l_cl,l_gen_adv,l_disc,total\n")
        for i, b in enumerate(history, start=1):
            fh.write(
                f"{i},{b.l_quan:.10g},{b.l_recons:.10g},{b.l_cl:.10g},"
                f"{b.l_gen_adv:.10g},{b.l_disc:.10g},{b.total_gen:.10g}\n"
            )


def save_model(path, model):
    arrays = {
        "P_x": model.attention.P_x, "P_y": model.attention.P_y,
        "W1": model.gcn.W1, "W2": model.gcn.W2, "Wc": model.head.Wc,
        "A1": model.disc.A1, "b1": model.disc.b1,
        "A2": model.disc.A2, "b2": model.disc.b2,
        "A3": model.disc.A3, "b3": model.disc.b3,
        "xatt_train": model.xatt_train, "z1_train": model.z1_train,
        "z_train": model.z_train, "degrees": model.degrees, "y_train": model.y_train,
    }
    if model.decoder is not None:
        arrays["Wd"] = model.decoder.Wd
    cfg = model.train_cfg
    meta = {
        "graph": {"mu": model.graph_cfg.mu, "bandwidth": model.graph_cfg.bandwidth,
                  "variant": model.graph_cfg.variant},
        "hyper": {"lambda1": model.hyper.lambda1, "lambda2": model.hyper.lambda2,
                  "lambda3": model.hyper.lambda3, "k": model.hyper.k,
                  "recon_target": model.hyper.recon_target},
        "train": {"lr": cfg.lr, "epochs": cfg.epochs, "batch": cfg.batch, "seed": cfg.seed,
                  "beta1": cfg.beta1, "beta2": cfg.beta2, "eps": cfg.eps,
                  "disc_steps": cfg.disc_steps, "saturating": cfg.saturating,
                  "train_attention": cfg.train_attention},
        "use_attention": model.use_attention,
        "sigma": model.sigma,
        "r": model.r,
    }
    net.save_arrays(path, arrays, meta)


def load_model(path):
    arrays, meta = net.load_arrays(path)
    return TrainedModel(
        attention=att.AttentionParams(arrays["P_x"], arrays["P_y"]),
        gcn=net.GcnParams(W1=arrays["W1"], W2=arrays["W2"]),
        disc=net.DiscParams(A1=arrays["A1"], b1=arrays["b1"], A2=arrays["A2"],
                            b2=arrays["b2"], A3=arrays["A3"], b3=arrays["b3"]),
        head=net.ClsHead(Wc=arrays["Wc"]),
        decoder=net.DecoderParams(Wd=arrays["Wd"]) if "Wd" in arrays else None,
        graph_cfg=sg.GraphConfig(**meta["graph"]),
        hyper=obj.Hyperparams(**meta["hyper"]),
        train_cfg=TrainConfig(**meta["train"]),
        use_attention=meta["use_attention"],
        sigma=meta["sigma"],
        xatt_train=arrays["xatt_train"], z1_train=arrays["z1_train"],
        z_train=arrays["z_train"], degrees=arrays["degrees"], y_train=arrays["y_train"],
    )
