"""GRU(128) -> GRU(64) -> causal conv(32) -> dense -> log-softmax.

Forward and backward passes are written out by hand over time-major
batches ``(T, B, features)``. All arithmetic is float64.
"""

from dataclasses import asdict, dataclass

import numpy as np

from .alphabet import N_CLASSES
from .errors import ParameterError


@dataclass(frozen=True)
class ModelConfig:
    input_dim: int = 20
    hidden1: int = 128
    hidden2: int = 64
    tcn_filters: int = 32
    tcn_kernel: int = 3
    n_classes: int = N_CLASSES
    dropout: float = 0.1

    def __post_init__(self):
        if not 0.0 <= self.dropout < 1.0:
            raise ParameterError("dropout must be in [0, 1)")

    def shapes(self):
        H1, H2, F, K = self.hidden1, self.hidden2, self.tcn_filters, self.tcn_kernel
        return {
            "gru1.W": (self.input_dim, 3 * H1),
            "gru1.U": (H1, 3 * H1),
            "gru1.b": (3 * H1,),
            "gru2.W": (H1, 3 * H2),
            "gru2.U": (H2, 3 * H2),
            "gru2.b": (3 * H2,),
            "tcn.W": (K, H2, F),
            "tcn.b": (F,),
            "dense.W": (F, self.n_classes),
            "dense.b": (self.n_classes,),
        }

    def to_dict(self):
        return asdict(self)


def _orthogonal(rng, n):
    q, r = np.linalg.qr(rng.standard_normal((n, n)))
    return q * np.sign(np.diag(r))


def init_params(cfg, seed=0):
    """Orthogonal recurrent blocks, fan-in scaled uniform inputs, zero biases."""
    rng = np.random.default_rng(seed)
    params = {}
    for name, shape in cfg.shapes().items():
        if name.endswith(".b"):
            params[name] = np.zeros(shape)
        elif name.endswith(".U"):
            H = shape[0]
            params[name] = np.hstack([_orthogonal(rng, H) for _ in range(3)])
        else:
            fan_in = int(np.prod(shape[:-1]))
            lim = np.sqrt(3.0 / fan_in)
            params[name] = rng.uniform(-lim, lim, size=shape)
    return params


def zero_params(cfg):
    return {name: np.zeros(shape) for name, shape in cfg.shapes().items()}


def check_params(params, cfg):
    for name, shape in cfg.shapes().items():
        if name not in params:
            raise ParameterError(f"missing parameter {name}")
        if params[name].shape != shape:
            raise ParameterError(f"{name}: shape {params[name].shape}, expected {shape}")


def sigmoid(a):
    return 0.5 * (1.0 + np.tanh(0.5 * a))


def log_softmax(a):
    m = a.max(axis=-1, keepdims=True)
    s = a - m
    return s - np.log(np.exp(s).sum(axis=-1, keepdims=True))


def gru_step(W, U, b, x_t, h_prev):
    """One GRU update for a single vector or a batch of rows."""
    x_t = np.asarray(x_t, dtype=np.float64)
    h_prev = np.asarray(h_prev, dtype=np.float64)
    H = U.shape[0]
    if W.shape != (x_t.shape[-1], 3 * H) or h_prev.shape[-1] != H or b.shape != (3 * H,):
        raise ParameterError("GRU parameter shapes do not match the inputs")
    xw = x_t @ W + b
    zr = sigmoid(xw[..., : 2 * H] + h_prev @ U[:, : 2 * H])
    z, r = zr[..., :H], zr[..., H:]
    cand = np.tanh(xw[..., 2 * H :] + (r * h_prev) @ U[:, 2 * H :])
    return (1.0 - z) * h_prev + z * cand


def gru_forward(W, U, b, x):
    T, B, _ = x.shape
    H = U.shape[0]
    xw = x @ W + b
    hs = np.zeros((T + 1, B, H))
    z = np.empty((T, B, H))
    r = np.empty((T, B, H))
    cand = np.empty((T, B, H))
    rh = np.empty((T, B, H))
    Uzr, Uh = U[:, : 2 * H], U[:, 2 * H :]
    for t in range(T):
        h = hs[t]
        zr = sigmoid(xw[t, :, : 2 * H] + h @ Uzr)
        z[t], r[t] = zr[:, :H], zr[:, H:]
        rh[t] = r[t] * h
        cand[t] = np.tanh(xw[t, :, 2 * H :] + rh[t] @ Uh)
        hs[t + 1] = h + z[t] * (cand[t] - h)
    return hs[1:], (x, hs, z, r, cand, rh)


def gru_backward(W, U, cache, dout):
    """Backpropagation through time; ``dout`` is dLoss/dh for every step."""
    x, hs, z, r, cand, rh = cache
    T, B, H = dout.shape
    Uzr_T, Uh_T = U[:, : 2 * H].T, U[:, 2 * H :].T
    da = np.empty((T, B, 3 * H))
    dh_next = np.zeros((B, H))
    for t in range(T - 1, -1, -1):
        dh = dout[t] + dh_next
        h = hs[t]
        zt, rt, ct = z[t], r[t], cand[t]
        da_h = dh * zt * (1.0 - ct * ct)
        da_z = dh * (ct - h) * zt * (1.0 - zt)
        drh = da_h @ Uh_T
        da_r = drh * h * rt * (1.0 - rt)
        da[t, :, :H] = da_z
        da[t, :, H : 2 * H] = da_r
        da[t, :, 2 * H :] = da_h
        dh_next = dh * (1.0 - zt) + drh * rt + da[t, :, : 2 * H] @ Uzr_T
    flat = da.reshape(T * B, 3 * H)
    dW = x.reshape(T * B, -1).T @ flat
    db = flat.sum(axis=0)
    dU = np.empty_like(U)
    dU[:, : 2 * H] = hs[:-1].reshape(T * B, H).T @ flat[:, : 2 * H]
    dU[:, 2 * H :] = rh.reshape(T * B, H).T @ flat[:, 2 * H :]
    dx = da @ W.T
    return dx, dW, dU, db


def conv_forward(Wc, bc, x):
    """Causal 1-D convolution, left-padded with K-1 zero frames."""
    K = Wc.shape[0]
    T = x.shape[0]
    xp = np.concatenate([np.zeros((K - 1,) + x.shape[1:]), x], axis=0)
    y = np.broadcast_to(bc, (T, x.shape[1], bc.shape[0])).copy()
    for k in range(K):
        y += xp[k : k + T] @ Wc[k]
    return y, xp


def conv_backward(Wc, xp, dy):
    K = Wc.shape[0]
    T, B, F = dy.shape
    dflat = dy.reshape(T * B, F)
    dxp = np.zeros_like(xp)
    dWc = np.empty_like(Wc)
    for k in range(K):
        dWc[k] = xp[k : k + T].reshape(T * B, -1).T @ dflat
        dxp[k : k + T] += dy @ Wc[k].T
    return dxp[K - 1 :], dWc, dflat.sum(axis=0)


def dropout_masks(rng, shapes, rate):
    if rate <= 0:
        return [None for _ in shapes]
    keep = 1.0 - rate
    return [(rng.random(s) < keep) / keep for s in shapes]


def forward(params, x, masks=(None, None)):
    """Batched forward pass. ``x`` is (T, B, D); returns log-probs and a cache."""
    W1, U1, b1 = params["gru1.W"], params["gru1.U"], params["gru1.b"]
    W2, U2, b2 = params["gru2.W"], params["gru2.U"], params["gru2.b"]
    if x.ndim != 3 or x.shape[2] != W1.shape[0]:
        raise ParameterError(f"expected input (T, B, {W1.shape[0]}), got {x.shape}")
    h1, c1 = gru_forward(W1, U1, b1, x)
    d1 = h1 if masks[0] is None else h1 * masks[0]
    h2, c2 = gru_forward(W2, U2, b2, d1)
    d2 = h2 if masks[1] is None else h2 * masks[1]
    pre, xp = conv_forward(params["tcn.W"], params["tcn.b"], d2)
    act = np.maximum(pre, 0.0)
    logits = act @ params["dense.W"] + params["dense.b"]
    logp = log_softmax(logits)
    return logp, (c1, c2, masks, xp, pre, act)


def backward(params, cache, dlogits):
    """Gradients of a loss given dLoss/dlogits of shape (T, B, C)."""
    c1, c2, masks, xp, pre, act = cache
    T, B, C = dlogits.shape
    grads = {}
    flat = dlogits.reshape(T * B, C)
    grads["dense.W"] = act.reshape(T * B, -1).T @ flat
    grads["dense.b"] = flat.sum(axis=0)
    dact = dlogits @ params["dense.W"].T
    dpre = dact * (pre > 0)
    dd2, grads["tcn.W"], grads["tcn.b"] = conv_backward(params["tcn.W"], xp, dpre)
    dh2 = dd2 if masks[1] is None else dd2 * masks[1]
    dd1, grads["gru2.W"], grads["gru2.U"], grads["gru2.b"] = gru_backward(
        params["gru2.W"], params["gru2.U"], c2, dh2
    )
    dh1 = dd1 if masks[0] is None else dd1 * masks[0]
    _, grads["gru1.W"], grads["gru1.U"], grads["gru1.b"] = gru_backward(
        params["gru1.W"], params["gru1.U"], c1, dh1
    )
    return grads


def model_forward(params, feats, train_mode=False, dropout_seed=None, dropout=0.1):
    """(T, D) features -> (T, C) log-probability lattice for one utterance.

    Accepts a :class:`~eegsr.features.FeatureSequence` or a bare matrix.
    """
    frames = getattr(feats, "frames", feats)
    x = np.asarray(frames, dtype=np.float64)
    if x.ndim != 2:
        raise ParameterError("features must be a (T, D) matrix")
    x = x[:, None, :]
    masks = (None, None)
    if train_mode and dropout > 0:
        rng = np.random.default_rng(dropout_seed)
        T = x.shape[0]
        masks = tuple(
            dropout_masks(rng, [(T, 1, params["gru1.U"].shape[0]), (T, 1, params["gru2.U"].shape[0])], dropout)
        )
    logp, _ = forward(params, x, masks)
    return logp[:, 0, :]
