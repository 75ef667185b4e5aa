"""Dense, LSTM and attention layers with hand-written backward passes.

Everything is float64 numpy on a single thread. Parameters live in flat
``dict[str, np.ndarray]`` maps so optimizers, gradient checks and model
files can treat every architecture uniformly. There is no general tape:
each model composes the layer backwards explicitly.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionMismatch, EmptySequence, ShapeMismatch

Params = dict[str, np.ndarray]

P_CLAMP = 1e-12


def glorot(rng: np.random.Generator, fan_out: int, fan_in: int) -> np.ndarray:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=(fan_out, fan_in))


def sigmoid(x):
    return 1.0 / (1.0 + np.exp(-np.asarray(x, dtype=np.float64)))


def softmax(x):
    x = np.asarray(x, dtype=np.float64)
    shifted = x - x.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


def bce_loss(p: float, y: int) -> float:
    """Binary cross-entropy with probabilities clamped away from {0, 1}."""
    p = min(max(float(p), P_CLAMP), 1.0 - P_CLAMP)
    return -(y * np.log(p) + (1 - y) * np.log(1.0 - p))


# ---------------------------------------------------------------------------
# Feed-forward stack
# ---------------------------------------------------------------------------


@dataclass
class DenseNet:
    """Affine stack: ReLU or tanh hidden layers, sigmoid/linear output."""

    layer_dims: list[int]
    params: Params
    hidden_activation: str = "relu"
    output_activation: str = "sigmoid"

    @property
    def input_dim(self) -> int:
        return self.layer_dims[0]

    @property
    def n_layers(self) -> int:
        return len(self.layer_dims) - 1


def init_dense_net(layer_dims, rng, hidden_activation="relu",
                   output_activation="sigmoid") -> DenseNet:
    params: Params = {}
    for i in range(len(layer_dims) - 1):
        params[f"W{i}"] = glorot(rng, layer_dims[i + 1], layer_dims[i])
        params[f"b{i}"] = np.zeros(layer_dims[i + 1])
    return DenseNet(list(layer_dims), params, hidden_activation, output_activation)


def _activate(z, kind):
    if kind == "relu":
        return np.maximum(z, 0.0)
    if kind == "tanh":
        return np.tanh(z)
    if kind == "sigmoid":
        return sigmoid(z)
    if kind == "linear":
        return z
    raise ValueError(f"unknown activation {kind!r}")


def ffn_forward(net: DenseNet, x, return_cache: bool = False):
    """Run the stack on a vector or a batch of row vectors."""
    a = np.asarray(x, dtype=np.float64)
    if a.shape[-1] != net.input_dim:
        raise DimensionMismatch(
            f"input dim {a.shape[-1]} != expected {net.input_dim}")
    cache = [a]
    for i in range(net.n_layers):
        z = a @ net.params[f"W{i}"].T + net.params[f"b{i}"]
        kind = net.output_activation if i == net.n_layers - 1 else net.hidden_activation
        a = _activate(z, kind)
        cache.append(a)
    return (a, cache) if return_cache else a


def ffn_backward(net: DenseNet, cache, dout, skip_output_activation=False):
    """Backprop; returns (dx, grads). ``dout`` matches the forward output.

    With ``skip_output_activation`` the caller passes the gradient at the
    final pre-activation instead (the fused sigmoid+BCE training path).
    """
    grads: Params = {}
    da = np.asarray(dout, dtype=np.float64)
    for i in range(net.n_layers - 1, -1, -1):
        a_out, a_in = cache[i + 1], cache[i]
        kind = net.output_activation if i == net.n_layers - 1 else net.hidden_activation
        if i == net.n_layers - 1 and skip_output_activation:
            dz = da
        elif kind == "relu":
            dz = da * (a_out > 0.0)
        elif kind == "tanh":
            dz = da * (1.0 - a_out ** 2)
        elif kind == "sigmoid":
            dz = da * a_out * (1.0 - a_out)
        else:
            dz = da
        if dz.ndim == 1:
            grads[f"W{i}"] = np.outer(dz, a_in)
            grads[f"b{i}"] = dz.copy()
        else:
            grads[f"W{i}"] = dz.T @ a_in
            grads[f"b{i}"] = dz.sum(axis=0)
        da = dz @ net.params[f"W{i}"]
    return da, grads


# ---------------------------------------------------------------------------
# LSTM / BiLSTM
# ---------------------------------------------------------------------------

_GATES = ("i", "f", "o", "g")


@dataclass
class LstmParams:
    input_dim: int
    hidden_dim: int
    params: Params  # W_i..W_g (H,D), U_i..U_g (H,H), b_i..b_g (H,)


def init_lstm(input_dim: int, hidden_dim: int, rng) -> LstmParams:
    params: Params = {}
    for gate in _GATES:
        params[f"W_{gate}"] = glorot(rng, hidden_dim, input_dim)
        params[f"U_{gate}"] = glorot(rng, hidden_dim, hidden_dim)
        params[f"b_{gate}"] = np.zeros(hidden_dim)
    params["b_f"] = np.ones(hidden_dim)  # open forget gate at init
    return LstmParams(input_dim, hidden_dim, params)


def _lstm_step(p: LstmParams, x, h, c):
    pr = p.params
    pre = {g: pr[f"W_{g}"] @ x + pr[f"U_{g}"] @ h + pr[f"b_{g}"] for g in _GATES}
    i = sigmoid(pre["i"])
    f = sigmoid(pre["f"])
    o = sigmoid(pre["o"])
    g = np.tanh(pre["g"])
    c2 = f * c + i * g
    tanh_c2 = np.tanh(c2)
    h2 = o * tanh_c2
    cache = (x, h, c, i, f, o, g, tanh_c2)
    return h2, c2, cache


def lstm_step(p: LstmParams, x, h, c):
    """One LSTM cell update; returns (h', c')."""
    x = np.asarray(x, dtype=np.float64)
    h = np.asarray(h, dtype=np.float64)
    c = np.asarray(c, dtype=np.float64)
    if x.shape != (p.input_dim,) or h.shape != (p.hidden_dim,) or c.shape != (p.hidden_dim,):
        raise DimensionMismatch("lstm_step input shapes do not match parameters")
    h2, c2, _ = _lstm_step(p, x, h, c)
    return h2, c2


def _lstm_step_backward(p: LstmParams, cache, dh2, dc2, grads: Params):
    x, h, c, i, f, o, g, tanh_c2 = cache
    do = dh2 * tanh_c2
    dc = dc2 + dh2 * o * (1.0 - tanh_c2 ** 2)
    df = dc * c
    dc_prev = dc * f
    di = dc * g
    dg = dc * i
    dpre = {
        "i": di * i * (1.0 - i),
        "f": df * f * (1.0 - f),
        "o": do * o * (1.0 - o),
        "g": dg * (1.0 - g ** 2),
    }
    dx = np.zeros_like(x)
    dh_prev = np.zeros_like(h)
    for gate in _GATES:
        d = dpre[gate]
        grads[f"W_{gate}"] += np.outer(d, x)
        grads[f"U_{gate}"] += np.outer(d, h)
        grads[f"b_{gate}"] += d
        dx += p.params[f"W_{gate}"].T @ d
        dh_prev += p.params[f"U_{gate}"].T @ d
    return dx, dh_prev, dc_prev


def _zero_grads_like(params: Params) -> Params:
    return {k: np.zeros_like(v) for k, v in params.items()}


def _lstm_run(p: LstmParams, seq):
    h = np.zeros(p.hidden_dim)
    c = np.zeros(p.hidden_dim)
    outs, caches = [], []
    for x in seq:
        h, c, cache = _lstm_step(p, x, h, c)
        outs.append(h)
        caches.append(cache)
    return np.array(outs), caches


def _lstm_run_backward(p: LstmParams, caches, douts):
    grads = _zero_grads_like(p.params)
    T = len(caches)
    dxs = [None] * T
    dh = np.zeros(p.hidden_dim)
    dc = np.zeros(p.hidden_dim)
    for t in range(T - 1, -1, -1):
        dx, dh, dc = _lstm_step_backward(p, caches[t], douts[t] + dh, dc, grads)
        dxs[t] = dx
    return np.array(dxs), grads


def bilstm_encode(params_fwd: LstmParams, params_bwd: LstmParams, seq,
                  return_cache: bool = False):
    """Encode a (T, D) sequence to (T, 2H): forward states ++ backward states."""
    seq = np.asarray(seq, dtype=np.float64)
    if seq.ndim != 2 or seq.shape[0] == 0:
        raise EmptySequence("bilstm_encode needs a non-empty (T, D) sequence")
    fwd, fwd_caches = _lstm_run(params_fwd, seq)
    bwd_rev, bwd_caches = _lstm_run(params_bwd, seq[::-1])
    out = np.concatenate([fwd, bwd_rev[::-1]], axis=1)
    if return_cache:
        return out, (fwd_caches, bwd_caches)
    return out


def bilstm_backward(params_fwd: LstmParams, params_bwd: LstmParams, cache, dout):
    """Backprop (T, 2H) gradients; returns (dseq, grads_fwd, grads_bwd)."""
    fwd_caches, bwd_caches = cache
    H = params_fwd.hidden_dim
    dout = np.asarray(dout, dtype=np.float64)
    dseq_f, grads_f = _lstm_run_backward(params_fwd, fwd_caches, dout[:, :H])
    dseq_b_rev, grads_b = _lstm_run_backward(params_bwd, bwd_caches, dout[::-1, H:])
    return dseq_f + dseq_b_rev[::-1], grads_f, grads_b


# ---------------------------------------------------------------------------
# Per-token attention gate
# ---------------------------------------------------------------------------


@dataclass
class AttentionNet:
    """Scalar scorer (tanh MLP, default 64/32 hidden) with softmax gating."""

    net: DenseNet


def init_attention(input_dim: int, rng, hidden=(64, 32)) -> AttentionNet:
    dims = [input_dim, *hidden, 1]
    return AttentionNet(init_dense_net(dims, rng, hidden_activation="tanh",
                                       output_activation="linear"))


def attention_apply(att: AttentionNet, seq, return_cache: bool = False):
    """Score each token, softmax the scores and rescale the sequence.

    weighted[t] = T * w[t] * seq[t], so uniform weights are a no-op.
    Returns (weights, weighted_seq).
    """
    seq = np.asarray(seq, dtype=np.float64)
    if seq.ndim != 2 or seq.shape[0] == 0:
        raise EmptySequence("attention_apply needs a non-empty (T, D) sequence")
    scores, mlp_cache = ffn_forward(att.net, seq, return_cache=True)
    scores = scores[:, 0]
    weights = softmax(scores)
    T = seq.shape[0]
    weighted = T * weights[:, None] * seq
    if return_cache:
        return weights, weighted, (seq, weights, mlp_cache)
    return weights, weighted


def attention_backward(att: AttentionNet, cache, dweighted):
    """Returns (dseq, grads) for the scorer MLP."""
    seq, weights, mlp_cache = cache
    T = seq.shape[0]
    dweighted = np.asarray(dweighted, dtype=np.float64)
    dw = T * (dweighted * seq).sum(axis=1)
    dseq = T * weights[:, None] * dweighted
    ds = weights * (dw - float(weights @ dw))  # softmax jacobian
    dseq_mlp, grads = ffn_backward(att.net, mlp_cache, ds[:, None])
    return dseq + dseq_mlp, grads


# ---------------------------------------------------------------------------
# Single-head dot-product token mixer
# ---------------------------------------------------------------------------


def init_self_attention(input_dim: int, rng) -> Params:
    return {
        "Wq": glorot(rng, input_dim, input_dim),
        "Wk": glorot(rng, input_dim, input_dim),
        "Wv": glorot(rng, input_dim, input_dim),
    }


def self_attention_apply(params: Params, seq, return_cache: bool = False):
    """Single head, no position encodings: softmax(QK^T/sqrt(d)) V."""
    seq = np.asarray(seq, dtype=np.float64)
    if seq.ndim != 2 or seq.shape[0] == 0:
        raise EmptySequence("self_attention_apply needs a non-empty sequence")
    q = seq @ params["Wq"].T
    k = seq @ params["Wk"].T
    v = seq @ params["Wv"].T
    scale = 1.0 / np.sqrt(seq.shape[1])
    attn = softmax(q @ k.T * scale)
    out = attn @ v
    if return_cache:
        return out, (seq, q, k, v, attn, scale)
    return out


def self_attention_backward(params: Params, cache, dout):
    seq, q, k, v, attn, scale = cache
    dout = np.asarray(dout, dtype=np.float64)
    dattn = dout @ v.T
    dv = attn.T @ dout
    # row-wise softmax jacobian
    dscores = attn * (dattn - (attn * dattn).sum(axis=1, keepdims=True))
    dq = dscores @ k * scale
    dk = dscores.T @ q * scale
    grads = {
        "Wq": dq.T @ seq,
        "Wk": dk.T @ seq,
        "Wv": dv.T @ seq,
    }
    dseq = dq @ params["Wq"] + dk @ params["Wk"] + dv @ params["Wv"]
    return dseq, grads


# ---------------------------------------------------------------------------
# Optimizers
# ---------------------------------------------------------------------------


@dataclass
class OptimizerState:
    kind: str = "adam"  # "sgd" | "adam"
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: Params = field(default_factory=dict)
    v: Params = field(default_factory=dict)


def optimizer_step(state: OptimizerState, params: Params, grads: Params) -> Params:
    """Apply one SGD or bias-corrected Adam update in place."""
    for name, g in grads.items():
        if name not in params or params[name].shape != g.shape:
            raise ShapeMismatch(f"gradient shape mismatch for {name!r}")
    state.step += 1
    for name, g in grads.items():
        p = params[name]
        if state.kind == "sgd":
            p -= state.learning_rate * g
            continue
        m = state.m.setdefault(name, np.zeros_like(p))
        v = state.v.setdefault(name, np.zeros_like(p))
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * g ** 2
        m_hat = m / (1.0 - state.beta1 ** state.step)
        v_hat = v / (1.0 - state.beta2 ** state.step)
        p -= state.learning_rate * m_hat / (np.sqrt(v_hat) + state.eps)
    return params


def prefixed(prefix: str, params: Params) -> Params:
    return {f"{prefix}.{k}": v for k, v in params.items()}


def merge_params(*groups: Params) -> Params:
    merged: Params = {}
    for group in groups:
        merged.update(group)
    return merged


def clone_params(params: Params) -> Params:
    return {k: v.copy() for k, v in params.items()}
