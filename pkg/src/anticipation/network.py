"""Recurrent predictor with per-sequence dropout masks.

The network is a small tanh MLP encoder on per-frame features, an LSTM
core, and linear heads: a K-way regression head (remaining minutes per
instrument), a Kx3 classification head, and an optional phase head.

Dropout is realized as explicit multiplicative masks sampled once per
sequence pass and reused at every time step (one mask per connection
group: encoder input, recurrent input, recurrent hidden state).  A fixed
mask set is one posterior sample of the parameters; averaging passes over
resampled masks is how inference approximates the predictive distribution.

Everything runs on float64 numpy.  Gradients are computed by hand with
backpropagation through time, truncated at window boundaries during
training (state is carried forward, gradients are not).
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy.special import expit

from . import labels
from .errors import NumericError
from .workflow import ProcedureSequence

OUTPUT_MODES = ("linear_clamped", "scaled_sigmoid")

Params = dict  # name -> np.ndarray, insertion-ordered


@dataclass(frozen=True)
class NetworkConfig:
    input_dim: int
    instruments: int
    hidden: int = 64
    encoder: tuple[int, ...] = (64, 64)
    phase_classes: int = 0
    dropout: float = 0.2
    output_mode: str = "linear_clamped"
    horizon: float = 3.0
    lambda_cls: float = 1e-2
    lambda_phase: Optional[float] = None
    weight_decay: float = 1e-5
    learning_rate: float = 1e-4
    window: int = 128
    accum_steps: int = 3
    epochs: int = 100
    seed: int = 0

    def __post_init__(self):
        if self.input_dim < 1 or self.hidden < 1 or self.instruments < 1:
            raise ValueError("input_dim, hidden and instruments must be >= 1")
        if any(w < 1 for w in self.encoder):
            raise ValueError("encoder widths must be >= 1")
        if not 0.0 <= self.dropout < 1.0:
            raise ValueError(f"dropout must be in [0, 1), got {self.dropout}")
        if self.output_mode not in OUTPUT_MODES:
            raise ValueError(f"output_mode must be one of {OUTPUT_MODES}")
        if self.lambda_cls < 0 or self.weight_decay < 0:
            raise ValueError("lambda_cls and weight_decay must be >= 0")
        if self.horizon <= 0:
            raise ValueError("horizon must be positive")
        if self.window < 1 or self.accum_steps < 1 or self.epochs < 0:
            raise ValueError("window, accum_steps must be >= 1 and epochs >= 0")
        if self.phase_classes < 0:
            raise ValueError("phase_classes must be >= 0")

    @property
    def encoder_out(self) -> int:
        return self.encoder[-1] if self.encoder else self.input_dim

    @property
    def phase_weight(self) -> float:
        return self.lambda_cls if self.lambda_phase is None else self.lambda_phase


@dataclass(frozen=True)
class DropoutMasks:
    """Scaled keep masks, fixed for the lifetime of one sequence pass."""

    rate: float
    encoder_input: np.ndarray
    recurrent_input: np.ndarray
    recurrent_hidden: np.ndarray


@dataclass
class RawOutputs:
    """Per-frame head outputs before any clamping."""

    regression: np.ndarray                 # (n, K) minutes
    class_logits: np.ndarray               # (n, K, 3)
    phase_logits: Optional[np.ndarray]     # (n, P) or None

    @property
    def n_frames(self) -> int:
        return self.regression.shape[0]


def config_hash(config: NetworkConfig) -> str:
    blob = json.dumps(config_to_dict(config), sort_keys=True).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


def config_to_dict(config: NetworkConfig) -> dict:
    return {
        "input_dim": config.input_dim,
        "instruments": config.instruments,
        "hidden": config.hidden,
        "encoder": list(config.encoder),
        "phase_classes": config.phase_classes,
        "dropout": config.dropout,
        "output_mode": config.output_mode,
        "horizon": config.horizon,
        "lambda_cls": config.lambda_cls,
        "lambda_phase": config.lambda_phase,
        "weight_decay": config.weight_decay,
        "learning_rate": config.learning_rate,
        "window": config.window,
        "accum_steps": config.accum_steps,
        "epochs": config.epochs,
        "seed": config.seed,
    }


def config_from_dict(payload: dict) -> NetworkConfig:
    payload = dict(payload)
    if "encoder" in payload:
        payload["encoder"] = tuple(payload["encoder"])
    return NetworkConfig(**payload)


def init_params(config: NetworkConfig, seed: int) -> Params:
    """Uniform fan-in initialization; forget-gate bias starts at 1."""
    rng = np.random.default_rng(seed)
    h = config.hidden

    def uniform(fan_in: int, shape) -> np.ndarray:
        limit = 1.0 / np.sqrt(fan_in)
        return rng.uniform(-limit, limit, size=shape)

    params: Params = {}
    prev = config.input_dim
    for l, width in enumerate(config.encoder):
        params[f"enc{l}_W"] = uniform(prev, (prev, width))
        params[f"enc{l}_b"] = np.zeros(width)
        prev = width
    params["lstm_Wx"] = uniform(prev, (prev, 4 * h))
    params["lstm_Wh"] = uniform(h, (h, 4 * h))
    b = np.zeros(4 * h)
    b[h:2 * h] = 1.0
    params["lstm_b"] = b
    params["reg_W"] = uniform(h, (h, config.instruments))
    params["reg_b"] = np.zeros(config.instruments)
    params["cls_W"] = uniform(h, (h, 3 * config.instruments))
    params["cls_b"] = np.zeros(3 * config.instruments)
    if config.phase_classes > 0:
        params["phase_W"] = uniform(h, (h, config.phase_classes))
        params["phase_b"] = np.zeros(config.phase_classes)
    return params


def n_params(params: Params) -> int:
    return sum(v.size for v in params.values())


def sample_masks(config: NetworkConfig, seed: int) -> DropoutMasks:
    """One posterior sample: i.i.d. Bernoulli keep masks scaled by 1/(1-p)."""
    rng = np.random.default_rng(seed)
    p = config.dropout
    scale = 1.0 / (1.0 - p)

    def draw(size: int) -> np.ndarray:
        return (rng.random(size) >= p).astype(np.float64) * scale

    return DropoutMasks(
        rate=p,
        encoder_input=draw(config.input_dim),
        recurrent_input=draw(config.encoder_out),
        recurrent_hidden=draw(config.hidden),
    )


def zero_state(config: NetworkConfig) -> tuple[np.ndarray, np.ndarray]:
    return np.zeros(config.hidden), np.zeros(config.hidden)


def _check_dims(config: NetworkConfig, masks: DropoutMasks, features: np.ndarray) -> None:
    if features.ndim != 2 or features.shape[1] != config.input_dim:
        raise ValueError(
            f"features must be (n, {config.input_dim}), got {features.shape}"
        )
    if (masks.encoder_input.shape != (config.input_dim,)
            or masks.recurrent_input.shape != (config.encoder_out,)
            or masks.recurrent_hidden.shape != (config.hidden,)):
        raise ValueError("dropout masks do not match the network configuration")


def _forward_cached(params, masks, features, config, state):
    n = features.shape[0]
    h_dim = config.hidden
    h, c = state if state is not None else zero_state(config)

    enc_acts = [features * masks.encoder_input]
    for l in range(len(config.encoder)):
        enc_acts.append(np.tanh(enc_acts[-1] @ params[f"enc{l}_W"] + params[f"enc{l}_b"]))
    xi = enc_acts[-1] * masks.recurrent_input
    xpart = xi @ params["lstm_Wx"] + params["lstm_b"]

    wh = params["lstm_Wh"]
    gates_i = np.empty((n, h_dim))
    gates_f = np.empty((n, h_dim))
    gates_o = np.empty((n, h_dim))
    gates_g = np.empty((n, h_dim))
    cells = np.empty((n, h_dim))
    cells_prev = np.empty((n, h_dim))
    tanh_c = np.empty((n, h_dim))
    hidden = np.empty((n, h_dim))
    hidden_masked_prev = np.empty((n, h_dim))
    for t in range(n):
        hm = h * masks.recurrent_hidden
        a = xpart[t] + hm @ wh
        gi = expit(a[:h_dim])
        gf = expit(a[h_dim:2 * h_dim])
        go = expit(a[2 * h_dim:3 * h_dim])
        gg = np.tanh(a[3 * h_dim:])
        cells_prev[t] = c
        c = gf * c + gi * gg
        tc = np.tanh(c)
        h_new = go * tc
        gates_i[t], gates_f[t], gates_o[t], gates_g[t] = gi, gf, go, gg
        cells[t], tanh_c[t], hidden[t] = c, tc, h_new
        hidden_masked_prev[t] = hm
        h = h_new

    reg_lin = hidden @ params["reg_W"] + params["reg_b"]
    if config.output_mode == "scaled_sigmoid":
        reg_sig = expit(reg_lin)
        regression = config.horizon * reg_sig
    else:
        reg_sig = None
        regression = reg_lin
    class_logits = (hidden @ params["cls_W"] + params["cls_b"]).reshape(n, config.instruments, 3)
    phase_logits = None
    if config.phase_classes > 0:
        phase_logits = hidden @ params["phase_W"] + params["phase_b"]

    outputs = RawOutputs(regression=regression, class_logits=class_logits, phase_logits=phase_logits)
    cache = {
        "enc_acts": enc_acts, "xi": xi,
        "gi": gates_i, "gf": gates_f, "go": gates_o, "gg": gates_g,
        "cells": cells, "cells_prev": cells_prev, "tanh_c": tanh_c,
        "hidden": hidden, "hm_prev": hidden_masked_prev, "reg_sig": reg_sig,
    }
    return outputs, (h.copy(), c.copy()), cache


def forward(
    params: Params,
    masks: DropoutMasks,
    features: np.ndarray,
    config: NetworkConfig,
    state: Optional[tuple[np.ndarray, np.ndarray]] = None,
) -> tuple[RawOutputs, tuple[np.ndarray, np.ndarray]]:
    """Run the network over a sequence of frames, strictly causally.

    The output at frame t depends only on ``features[0..t]`` and the
    initial state; in ``linear_clamped`` mode the regression output is the
    raw linear value (clamping to [0, horizon] happens at metric time).
    """
    features = np.asarray(features, dtype=np.float64)
    _check_dims(config, masks, features)
    outputs, final_state, _ = _forward_cached(params, masks, features, config, state)
    return outputs, final_state


def smooth_l1(diff: np.ndarray) -> np.ndarray:
    """0.5 d^2 for |d| < 1, |d| - 0.5 otherwise (d in minutes)."""
    a = np.abs(diff)
    return np.where(a < 1.0, 0.5 * diff * diff, a - 0.5)


def _log_softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=-1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=-1, keepdims=True))


def softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


def compute_loss(
    outputs: RawOutputs,
    remaining: np.ndarray,
    classes: np.ndarray,
    params: Params,
    lambda_cls: float,
    weight_decay: float,
    phase_labels: Optional[np.ndarray] = None,
    lambda_phase: Optional[float] = None,
) -> tuple[float, dict]:
    """Total loss and its additive terms.

    total = mean over frames of sum over instruments of
            [SmoothL1(f, r) + lambda_cls * CE(softmax(logits), c)]
            + weight_decay * ||theta||^2  (+ phase cross entropy term).
    """
    n = outputs.n_frames
    if remaining.shape != outputs.regression.shape or classes.shape != remaining.shape:
        raise ValueError("outputs and targets have mismatched shapes")
    reg_term = float(smooth_l1(outputs.regression - remaining).sum(axis=1).mean())
    logp = _log_softmax(outputs.class_logits)
    picked = np.take_along_axis(logp, classes[:, :, None].astype(np.int64), axis=2)[:, :, 0]
    cls_term = float(lambda_cls * (-picked).sum(axis=1).mean())
    l2_term = float(weight_decay * sum(float((v * v).sum()) for v in params.values()))
    terms = {"regression": reg_term, "classification": cls_term, "l2": l2_term}
    if phase_labels is not None:
        if outputs.phase_logits is None:
            raise ValueError("phase labels given but the network has no phase head")
        if phase_labels.shape[0] != n:
            raise ValueError("phase labels length mismatch")
        lam_ph = lambda_cls if lambda_phase is None else lambda_phase
        logp_ph = _log_softmax(outputs.phase_logits)
        picked_ph = np.take_along_axis(logp_ph, phase_labels[:, None].astype(np.int64), axis=1)[:, 0]
        terms["phase"] = float(lam_ph * (-picked_ph).mean())
    total = float(sum(terms.values()))
    return total, terms


def loss_and_gradients(
    params: Params,
    masks: DropoutMasks,
    features: np.ndarray,
    remaining: np.ndarray,
    classes: np.ndarray,
    config: NetworkConfig,
    phase_labels: Optional[np.ndarray] = None,
    state: Optional[tuple[np.ndarray, np.ndarray]] = None,
):
    """Forward pass, loss, and analytic gradients for one window.

    Gradients are truncated at the window boundary: the initial state is
    treated as a constant.  Returns (total, terms, grads, final_state).
    """
    features = np.asarray(features, dtype=np.float64)
    _check_dims(config, masks, features)
    outputs, final_state, cache = _forward_cached(params, masks, features, config, state)
    total, terms = compute_loss(
        outputs, remaining, classes, params,
        config.lambda_cls, config.weight_decay,
        phase_labels=phase_labels, lambda_phase=config.lambda_phase,
    )

    n = features.shape[0]
    h_dim = config.hidden
    hidden = cache["hidden"]

    # Head gradients.
    diff = outputs.regression - remaining
    d_reg = np.clip(diff, -1.0, 1.0) / n
    if config.output_mode == "scaled_sigmoid":
        sig = cache["reg_sig"]
        d_reg = d_reg * config.horizon * sig * (1.0 - sig)
    probs = softmax(outputs.class_logits)
    onehot = np.zeros_like(probs)
    np.put_along_axis(onehot, classes[:, :, None].astype(np.int64), 1.0, axis=2)
    d_logits = (config.lambda_cls / n) * (probs - onehot)
    d_logits_flat = d_logits.reshape(n, -1)

    grads: Params = {name: np.zeros_like(value) for name, value in params.items()}
    grads["reg_W"] = hidden.T @ d_reg
    grads["reg_b"] = d_reg.sum(axis=0)
    grads["cls_W"] = hidden.T @ d_logits_flat
    grads["cls_b"] = d_logits_flat.sum(axis=0)
    d_hidden = d_reg @ params["reg_W"].T + d_logits_flat @ params["cls_W"].T
    if phase_labels is not None and outputs.phase_logits is not None:
        probs_ph = softmax(outputs.phase_logits)
        onehot_ph = np.zeros_like(probs_ph)
        np.put_along_axis(onehot_ph, phase_labels[:, None].astype(np.int64), 1.0, axis=1)
        d_phase = (config.phase_weight / n) * (probs_ph - onehot_ph)
        grads["phase_W"] = hidden.T @ d_phase
        grads["phase_b"] = d_phase.sum(axis=0)
        d_hidden = d_hidden + d_phase @ params["phase_W"].T

    # Backward through time; gate pre-activation gradients collected per frame.
    gi, gf, go, gg = cache["gi"], cache["gf"], cache["go"], cache["gg"]
    tanh_c, cells_prev = cache["tanh_c"], cache["cells_prev"]
    wh = params["lstm_Wh"]
    d_gates = np.empty((n, 4 * h_dim))
    dh_carry = np.zeros(h_dim)
    dc_carry = np.zeros(h_dim)
    for t in range(n - 1, -1, -1):
        dh = d_hidden[t] + dh_carry
        d_o = dh * tanh_c[t]
        dc = dc_carry + dh * go[t] * (1.0 - tanh_c[t] ** 2)
        d_i = dc * gg[t]
        d_g = dc * gi[t]
        d_f = dc * cells_prev[t]
        dc_carry = dc * gf[t]
        d_gates[t, :h_dim] = d_i * gi[t] * (1.0 - gi[t])
        d_gates[t, h_dim:2 * h_dim] = d_f * gf[t] * (1.0 - gf[t])
        d_gates[t, 2 * h_dim:3 * h_dim] = d_o * go[t] * (1.0 - go[t])
        d_gates[t, 3 * h_dim:] = d_g * (1.0 - gg[t] ** 2)
        dh_carry = (d_gates[t] @ wh.T) * masks.recurrent_hidden

    grads["lstm_Wx"] = cache["xi"].T @ d_gates
    grads["lstm_Wh"] = cache["hm_prev"].T @ d_gates
    grads["lstm_b"] = d_gates.sum(axis=0)

    d_enc = (d_gates @ params["lstm_Wx"].T) * masks.recurrent_input
    for l in range(len(config.encoder) - 1, -1, -1):
        act = cache["enc_acts"][l + 1]
        dz = d_enc * (1.0 - act ** 2)
        grads[f"enc{l}_W"] = cache["enc_acts"][l].T @ dz
        grads[f"enc{l}_b"] = dz.sum(axis=0)
        d_enc = dz @ params[f"enc{l}_W"].T

    two_gamma = 2.0 * config.weight_decay
    for name, value in params.items():
        grads[name] += two_gamma * value

    return total, terms, grads, final_state


def backward(
    params: Params,
    masks: DropoutMasks,
    features: np.ndarray,
    remaining: np.ndarray,
    classes: np.ndarray,
    config: NetworkConfig,
    phase_labels: Optional[np.ndarray] = None,
    state: Optional[tuple[np.ndarray, np.ndarray]] = None,
) -> Params:
    """Gradient of :func:`compute_loss` with respect to every parameter."""
    _, _, grads, _ = loss_and_gradients(
        params, masks, features, remaining, classes, config,
        phase_labels=phase_labels, state=state,
    )
    for name, g in grads.items():
        if not np.isfinite(g).all():
            raise NumericError(f"non-finite gradient in parameter {name!r}")
    return grads


class Adam:
    """Adaptive-moment update with bias correction."""

    def __init__(self, params: Params, lr: float, beta1: float = 0.9,
                 beta2: float = 0.999, eps: float = 1e-8):
        self.lr = lr
        self.beta1, self.beta2, self.eps = beta1, beta2, eps
        self.m = {k: np.zeros_like(v) for k, v in params.items()}
        self.v = {k: np.zeros_like(v) for k, v in params.items()}
        self.t = 0

    def step(self, params: Params, grads: Params) -> None:
        self.t += 1
        bc1 = 1.0 - self.beta1 ** self.t
        bc2 = 1.0 - self.beta2 ** self.t
        for name, g in grads.items():
            m = self.m[name] = self.beta1 * self.m[name] + (1.0 - self.beta1) * g
            v = self.v[name] = self.beta2 * self.v[name] + (1.0 - self.beta2) * g * g
            params[name] -= self.lr * (m / bc1) / (np.sqrt(v / bc2) + self.eps)


def _derived_seed(*parts: int) -> int:
    return int(np.random.SeedSequence(parts).generate_state(1)[0])


def train(
    sequences: Sequence[ProcedureSequence],
    config: NetworkConfig,
) -> tuple[Params, list[dict]]:
    """Train on full sequences with windowed truncated BPTT.

    Per video and epoch one dropout mask set is sampled and reused for every
    window; recurrent state is carried across windows of ``config.window``
    frames while gradients stop at window boundaries.  Gradients are
    averaged over groups of ``config.accum_steps`` windows before each Adam
    update (a shorter leftover group at the end of a video still updates).
    Returns the trained parameters and a per-epoch log of loss terms.
    """
    if not sequences:
        raise ValueError("train set must be nonempty")
    for seq in sequences:
        if seq.features is None:
            raise ValueError(f"sequence {seq.id!r} has no features")
        if seq.features.shape[1] != config.input_dim:
            raise ValueError(
                f"sequence {seq.id!r} feature dim {seq.features.shape[1]} != {config.input_dim}"
            )
        if config.phase_classes > 0:
            if seq.phase is None:
                raise ValueError(f"phase head configured but sequence {seq.id!r} has no phases")
            if int(seq.phase.max()) >= config.phase_classes:
                raise ValueError(
                    f"sequence {seq.id!r} has phase index {int(seq.phase.max())} but the "
                    f"head covers {config.phase_classes} classes"
                )

    targets = [labels.compute_targets(seq, config.horizon) for seq in sequences]
    params = init_params(config, config.seed)
    adam = Adam(params, lr=config.learning_rate)
    log: list[dict] = []

    for epoch in range(config.epochs):
        order = np.random.default_rng(_derived_seed(config.seed, 1, epoch)).permutation(len(sequences))
        sums: dict = {}
        frames_seen = 0
        for vi in order:
            seq, tgt = sequences[vi], targets[vi]
            masks = sample_masks(config, _derived_seed(config.seed, 2, epoch, int(vi)))
            state = zero_state(config)
            acc: Optional[Params] = None
            acc_count = 0
            for start in range(0, seq.n_frames, config.window):
                stop = min(start + config.window, seq.n_frames)
                phase_slice = seq.phase[start:stop] if config.phase_classes > 0 else None
                total, terms, grads, state = loss_and_gradients(
                    params, masks,
                    seq.features[start:stop],
                    tgt.remaining[start:stop],
                    tgt.classes[start:stop],
                    config,
                    phase_labels=phase_slice,
                    state=state,
                )
                if not np.isfinite(total):
                    raise NumericError(
                        f"non-finite loss at epoch {epoch}, video {seq.id!r}, frame {start}"
                    )
                if acc is None:
                    acc = {k: g.copy() for k, g in grads.items()}
                else:
                    for k, g in grads.items():
                        acc[k] += g
                acc_count += 1
                if acc_count == config.accum_steps:
                    adam.step(params, {k: g / acc_count for k, g in acc.items()})
                    acc, acc_count = None, 0
                nw = stop - start
                frames_seen += nw
                for key, value in {**terms, "total": total}.items():
                    sums[key] = sums.get(key, 0.0) + value * nw
            if acc_count:
                adam.step(params, {k: g / acc_count for k, g in acc.items()})
        log.append({"epoch": epoch, **{k: v / max(frames_seen, 1) for k, v in sums.items()}})
    return params, log


# ---------------------------------------------------------------------------
# Checkpoints: one JSON header line, then raw float64 little-endian values
# ---------------------------------------------------------------------------

CHECKPOINT_FORMAT = "anticipation-params-v1"


def save_params(params: Params, path: str, config: Optional[NetworkConfig] = None) -> None:
    header = {
        "format": CHECKPOINT_FORMAT,
        "dtype": "<f8",
        "params": [[name, list(value.shape)] for name, value in params.items()],
        "config_hash": config_hash(config) if config is not None else None,
    }
    with open(path, "wb") as fh:
        fh.write(json.dumps(header, sort_keys=True).encode() + b"\n")
        for value in params.values():
            fh.write(np.ascontiguousarray(value, dtype="<f8").tobytes())


def load_params(path: str, config: Optional[NetworkConfig] = None) -> Params:
    with open(path, "rb") as fh:
        header = json.loads(fh.readline().decode())
        if header.get("format") != CHECKPOINT_FORMAT:
            raise ValueError(f"{path}: not a parameter checkpoint")
        if config is not None and header.get("config_hash") not in (None, config_hash(config)):
            raise ValueError(f"{path}: checkpoint was written for a different configuration")
        params: Params = {}
        for name, shape in header["params"]:
            count = int(np.prod(shape)) if shape else 1
            data = np.frombuffer(fh.read(count * 8), dtype="<f8", count=count)
            params[name] = data.reshape(shape).copy()
    return params
