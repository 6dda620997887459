"""MLP-GRU-softmax network: parameters, forward pass, analytic BPTT, Adam.

The architecture is a single-hidden-layer MLP applied per frame (spatial
features), a single unidirectional GRU layer over the frame features
(temporal), and a linear output layer read at the last valid frame.
Everything computes in 64-bit floats; gradients are hand-derived, not
autodiff, so they can be checked against finite differences.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator

import numpy as np

PARAM_NAMES = (
    "W1", "b1",
    "Wz", "Wr", "Wn",
    "Uz", "Ur", "Un",
    "bz", "br", "bn",
    "Wo", "bo",
)

PROB_FLOOR = 1e-12


class NonFiniteError(FloatingPointError):
    """A network tensor went non-finite; the message names it."""


@dataclass(frozen=True)
class Dims:
    input: int = 138
    mlp_hidden: int = 256
    gru_hidden: int = 512
    num_classes: int = 2

    def validate(self) -> None:
        for name in ("input", "mlp_hidden", "gru_hidden", "num_classes"):
            value = getattr(self, name)
            if value < 1:
                raise ValueError(f"dims.{name} must be >= 1, got {value}")


@dataclass
class ModelParams:
    """All learnable tensors, shaped (out, in) so application is x @ W.T + b."""

    dims: Dims
    W1: np.ndarray
    b1: np.ndarray
    Wz: np.ndarray
    Wr: np.ndarray
    Wn: np.ndarray
    Uz: np.ndarray
    Ur: np.ndarray
    Un: np.ndarray
    bz: np.ndarray
    br: np.ndarray
    bn: np.ndarray
    Wo: np.ndarray
    bo: np.ndarray

    def tensors(self) -> Iterator[tuple[str, np.ndarray]]:
        for name in PARAM_NAMES:
            yield name, getattr(self, name)

    def copy(self) -> "ModelParams":
        return ModelParams(self.dims, **{n: t.copy() for n, t in self.tensors()})

    def validate(self) -> None:
        self.dims.validate()
        for name, shape in expected_shapes(self.dims).items():
            tensor = getattr(self, name)
            if tensor.shape != shape:
                raise ValueError(f"{name} has shape {tensor.shape}, expected {shape}")
            if not np.all(np.isfinite(tensor)):
                raise NonFiniteError(f"parameter tensor {name} is non-finite")


def expected_shapes(dims: Dims) -> dict[str, tuple[int, ...]]:
    f, hm, hg, k = dims.input, dims.mlp_hidden, dims.gru_hidden, dims.num_classes
    return {
        "W1": (hm, f), "b1": (hm,),
        "Wz": (hg, hm), "Wr": (hg, hm), "Wn": (hg, hm),
        "Uz": (hg, hg), "Ur": (hg, hg), "Un": (hg, hg),
        "bz": (hg,), "br": (hg,), "bn": (hg,),
        "Wo": (k, hg), "bo": (k,),
    }


def init_params(dims: Dims, seed: int) -> ModelParams:
    """Glorot-uniform weights (+-sqrt(6/(fan_in+fan_out))), zero biases; deterministic per seed."""
    dims.validate()
    rng = np.random.default_rng(seed)
    tensors: dict[str, np.ndarray] = {}
    for name, shape in expected_shapes(dims).items():
        if len(shape) == 1:
            tensors[name] = np.zeros(shape)
        else:
            fan_out, fan_in = shape
            limit = np.sqrt(6.0 / (fan_in + fan_out))
            tensors[name] = rng.uniform(-limit, limit, shape)
    return ModelParams(dims, **tensors)


def relu(v: np.ndarray) -> np.ndarray:
    """Elementwise max(0, x)."""
    return np.maximum(v, 0.0)


def sigmoid(v: np.ndarray) -> np.ndarray:
    # clip keeps exp in range; beyond +-500 the result is 0/1 at float64 anyway
    return 1.0 / (1.0 + np.exp(-np.clip(v, -500.0, 500.0)))


def softmax(logits: np.ndarray) -> np.ndarray:
    """Stable softmax over the last axis; rows sum to 1 and entries lie in (0, 1)."""
    shifted = logits - np.max(logits, axis=-1, keepdims=True)
    exp = np.exp(shifted)
    return exp / exp.sum(axis=-1, keepdims=True)


def cross_entropy(probabilities: np.ndarray, targets_onehot: np.ndarray) -> float:
    """Mean categorical cross-entropy over the batch.

    probabilities: (B, K) rows summing to 1 (within 1e-6); targets: one-hot (B, K).
    The predicted probability of the true class is floored at 1e-12 before the log.
    """
    probabilities = np.atleast_2d(probabilities)
    targets_onehot = np.atleast_2d(targets_onehot)
    if probabilities.shape != targets_onehot.shape:
        raise ValueError(
            f"shape mismatch: probabilities {probabilities.shape} "
            f"vs targets {targets_onehot.shape}"
        )
    sums = probabilities.sum(axis=-1)
    if np.any(np.abs(sums - 1.0) > 1e-6):
        raise ValueError("probability rows must sum to 1 within 1e-6")
    true_prob = (probabilities * targets_onehot).sum(axis=-1)
    return float(np.mean(-np.log(np.maximum(true_prob, PROB_FLOOR))))


def one_hot(targets: np.ndarray, num_classes: int) -> np.ndarray:
    targets = np.asarray(targets, dtype=np.intp)
    out = np.zeros((targets.shape[0], num_classes))
    out[np.arange(targets.shape[0]), targets] = 1.0
    return out


@dataclass
class ForwardCache:
    """Every intermediate the backward pass needs, in (T, B, .) step order."""

    x: np.ndarray          # (B, T, F)
    lengths: np.ndarray    # (B,)
    mask: np.ndarray       # (T, B, 1) floats, 1 while t < length
    m: np.ndarray          # (B, T, Hm) frame features after ReLU
    z: np.ndarray          # (T, B, Hg)
    r: np.ndarray          # (T, B, Hg)
    n: np.ndarray          # (T, B, Hg)
    hprev: np.ndarray      # (T, B, Hg) hidden state entering each step
    h_final: np.ndarray    # (B, Hg)
    logits: np.ndarray     # (B, K)


def forward_batch(
    params: ModelParams, x: np.ndarray, lengths: np.ndarray
) -> tuple[np.ndarray, ForwardCache]:
    """Run the network over a zero-padded batch.

    x: (B, T, F); lengths: (B,) valid frame counts.  Steps at or beyond a
    sample's length leave its hidden state untouched, so the readout equals
    the hidden state at the last valid frame regardless of padding.
    """
    x = np.asarray(x, dtype=np.float64)
    lengths = np.asarray(lengths, dtype=np.intp)
    if x.ndim != 3:
        raise ValueError(f"expected (B, T, F) input, got shape {x.shape}")
    batch, steps, width = x.shape
    if width != params.dims.input:
        raise ValueError(f"frame width {width} != dims.input {params.dims.input}")
    if steps < 1:
        raise ValueError("need at least one frame")
    if np.any(lengths < 1) or np.any(lengths > steps):
        raise ValueError(f"valid lengths must lie in [1, {steps}]")

    hg = params.dims.gru_hidden
    flat = x.reshape(batch * steps, width)
    m = relu(flat @ params.W1.T + params.b1).reshape(batch, steps, -1)
    mflat = m.reshape(batch * steps, -1)
    # Input-to-gate projections for all steps at once; recurrent parts per step.
    pz = (mflat @ params.Wz.T + params.bz).reshape(batch, steps, hg)
    pr = (mflat @ params.Wr.T + params.br).reshape(batch, steps, hg)
    pn = (mflat @ params.Wn.T + params.bn).reshape(batch, steps, hg)

    mask = (np.arange(steps)[:, None] < lengths[None, :]).astype(np.float64)
    mask = mask[:, :, None]
    z_all = np.empty((steps, batch, hg))
    r_all = np.empty((steps, batch, hg))
    n_all = np.empty((steps, batch, hg))
    hprev_all = np.empty((steps, batch, hg))

    h = np.zeros((batch, hg))
    for t in range(steps):
        hprev_all[t] = h
        z = sigmoid(pz[:, t] + h @ params.Uz.T)
        r = sigmoid(pr[:, t] + h @ params.Ur.T)
        n = np.tanh(pn[:, t] + (r * h) @ params.Un.T)
        z_all[t], r_all[t], n_all[t] = z, r, n
        h = h + mask[t] * ((1.0 - z) * n + z * h - h)

    logits = h @ params.Wo.T + params.bo
    if not np.all(np.isfinite(logits)):
        _name_nonfinite(m, z_all, r_all, n_all, h, logits)

    cache = ForwardCache(
        x=x, lengths=lengths, mask=mask, m=m,
        z=z_all, r=r_all, n=n_all, hprev=hprev_all,
        h_final=h, logits=logits,
    )
    return logits, cache


def forward(
    params: ModelParams, seq: np.ndarray, valid_length: int | None = None
) -> tuple[np.ndarray, ForwardCache]:
    """Single-sequence forward; seq is (T, F).  Returns (logits (K,), cache)."""
    seq = np.asarray(seq, dtype=np.float64)
    if seq.ndim != 2:
        raise ValueError(f"expected (T, F) input, got shape {seq.shape}")
    length = seq.shape[0] if valid_length is None else valid_length
    logits, cache = forward_batch(params, seq[None, :, :], np.array([length]))
    return logits[0], cache


def _name_nonfinite(m, z, r, n, h, logits) -> None:
    for name, tensor in (("mlp features", m), ("gate z", z), ("gate r", r),
                         ("candidate n", n), ("hidden state", h), ("logits", logits)):
        if not np.all(np.isfinite(tensor)):
            raise NonFiniteError(f"non-finite values in {name}")
    raise NonFiniteError("non-finite values in forward pass")


def backward(
    params: ModelParams, cache: ForwardCache, targets: np.ndarray
) -> dict[str, np.ndarray]:
    """Analytic gradient of mean softmax-cross-entropy w.r.t. every parameter.

    Backpropagates through time over valid frames only: padded steps pass
    the hidden-state gradient through unchanged and contribute nothing.
    targets: (B,) integer class indices matching the cached forward batch.
    """
    targets = np.atleast_1d(np.asarray(targets, dtype=np.intp))
    batch = cache.logits.shape[0]
    if targets.shape != (batch,):
        raise ValueError(f"targets shape {targets.shape} does not match batch {batch}")
    if np.any(targets < 0) or np.any(targets >= params.dims.num_classes):
        raise ValueError("target class index out of range")

    steps = cache.mask.shape[0]
    hg = params.dims.gru_hidden

    probs = softmax(cache.logits)
    dlogits = probs.copy()
    dlogits[np.arange(batch), targets] -= 1.0
    dlogits /= batch

    grads: dict[str, np.ndarray] = {}
    grads["Wo"] = dlogits.T @ cache.h_final
    grads["bo"] = dlogits.sum(axis=0)
    dh = dlogits @ params.Wo

    daz_all = np.empty((steps, batch, hg))
    dar_all = np.empty((steps, batch, hg))
    dan_all = np.empty((steps, batch, hg))
    for t in range(steps - 1, -1, -1):
        mt = cache.mask[t]
        z, r, n, hprev = cache.z[t], cache.r[t], cache.n[t], cache.hprev[t]
        dz = dh * (hprev - n)
        dn = dh * (1.0 - z)
        dan = dn * (1.0 - n * n) * mt
        daz = dz * z * (1.0 - z) * mt
        drh = dan @ params.Un
        dar = drh * hprev * r * (1.0 - r)
        dan_all[t], daz_all[t], dar_all[t] = dan, daz, dar
        dh_step = dh * z + drh * r + daz @ params.Uz + dar @ params.Ur
        dh = dh + mt * (dh_step - dh)

    mflat = cache.m.transpose(1, 0, 2).reshape(steps * batch, -1)
    hprevflat = cache.hprev.reshape(steps * batch, hg)
    rhflat = (cache.r * cache.hprev).reshape(steps * batch, hg)
    dazf = daz_all.reshape(steps * batch, hg)
    darf = dar_all.reshape(steps * batch, hg)
    danf = dan_all.reshape(steps * batch, hg)

    grads["Wz"] = dazf.T @ mflat
    grads["Wr"] = darf.T @ mflat
    grads["Wn"] = danf.T @ mflat
    grads["Uz"] = dazf.T @ hprevflat
    grads["Ur"] = darf.T @ hprevflat
    grads["Un"] = danf.T @ rhflat
    grads["bz"] = dazf.sum(axis=0)
    grads["br"] = darf.sum(axis=0)
    grads["bn"] = danf.sum(axis=0)

    dm = dazf @ params.Wz + darf @ params.Wr + danf @ params.Wn
    da = dm * (mflat > 0.0)
    xflat = cache.x.transpose(1, 0, 2).reshape(steps * batch, -1)
    grads["W1"] = da.T @ xflat
    grads["b1"] = da.sum(axis=0)
    return grads


@dataclass
class AdamState:
    """First/second moment estimates plus the step counter and hyperparameters."""

    m: dict[str, np.ndarray]
    v: dict[str, np.ndarray]
    t: int = 0
    learning_rate: float = 1e-5
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def for_params(cls, params: ModelParams, learning_rate: float = 1e-5,
                   beta1: float = 0.9, beta2: float = 0.999,
                   eps: float = 1e-8) -> "AdamState":
        return cls(
            m={name: np.zeros_like(t) for name, t in params.tensors()},
            v={name: np.zeros_like(t) for name, t in params.tensors()},
            learning_rate=learning_rate, beta1=beta1, beta2=beta2, eps=eps,
        )


def adam_step(
    params: ModelParams, grads: dict[str, np.ndarray], state: AdamState
) -> tuple[ModelParams, AdamState]:
    """One bias-corrected Adam update; pure (returns fresh params and state)."""
    t = state.t + 1
    b1, b2 = state.beta1, state.beta2
    new_m: dict[str, np.ndarray] = {}
    new_v: dict[str, np.ndarray] = {}
    new_tensors: dict[str, np.ndarray] = {}
    for name, tensor in params.tensors():
        g = grads[name]
        if g.shape != tensor.shape:
            raise ValueError(f"gradient {name} has shape {g.shape}, expected {tensor.shape}")
        m = b1 * state.m[name] + (1.0 - b1) * g
        v = b2 * state.v[name] + (1.0 - b2) * (g * g)
        m_hat = m / (1.0 - b1 ** t)
        v_hat = v / (1.0 - b2 ** t)
        updated = tensor - state.learning_rate * m_hat / (np.sqrt(v_hat) + state.eps)
        if not np.all(np.isfinite(updated)):
            raise NonFiniteError(f"non-finite Adam update for tensor {name}")
        new_m[name], new_v[name], new_tensors[name] = m, v, updated
    new_params = ModelParams(params.dims, **new_tensors)
    new_state = AdamState(
        m=new_m, v=new_v, t=t,
        learning_rate=state.learning_rate, beta1=state.beta1,
        beta2=state.beta2, eps=state.eps,
    )
    return new_params, new_state
