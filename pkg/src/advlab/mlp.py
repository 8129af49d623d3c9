"""Bias-free ReLU multi-layer perceptrons with exact reverse-mode gradients.

A network is a list of weight matrices W_1..W_L, layer l shaped
H_l x H_{l-1}; logits(x) = W_L relu(... relu(W_1 x)).  There are no bias
vectors, so scaling every W_l by c > 0 scales logits by c^L (positive
homogeneity).  The ReLU subgradient at exactly 0 is taken as 0.

Checkpoint format (little-endian): magic "AMLP" | u8 version=1 |
u32 L+1 | (L+1) x u32 widths | per layer row-major float64 entries.

Note on figure conventions elsewhere in this project: a "1-layer MLP"
means one hidden layer, i.e. widths [d, H, K].
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .core import ParameterError, ShapeError, as_matrix, check_finite, make_rng

CHECKPOINT_MAGIC = b"AMLP"
CHECKPOINT_VERSION = 1


@dataclass(frozen=True)
class MlpConfig:
    layer_widths: list  # [H_0=d, H_1, ..., H_L=K]
    seed: int = 0
    init_scale: float | None = None  # None -> He scaling sqrt(2/fan_in)

    def __post_init__(self):
        if len(self.layer_widths) < 2 or any(w < 1 for w in self.layer_widths):
            raise ParameterError("layer_widths needs length >= 2, all widths >= 1")


@dataclass(frozen=True)
class ForwardTrace:
    inputs: np.ndarray
    pre_activations: list  # length L; last entry == logits
    post_activations: list  # length L-1, relu of pre

    @property
    def logits(self) -> np.ndarray:
        return self.pre_activations[-1]


def init_weights(cfg: MlpConfig) -> list:
    """Gaussian init, std sqrt(2/fan_in) (He) or a fixed scale."""
    rng = make_rng(cfg.seed)
    widths = cfg.layer_widths
    layers = []
    for l in range(1, len(widths)):
        scale = np.sqrt(2.0 / widths[l - 1]) if cfg.init_scale is None else cfg.init_scale
        layers.append(scale * rng.standard_normal((widths[l], widths[l - 1])))
    return layers


def widths_of(weights: list) -> list:
    return [weights[0].shape[1]] + [w.shape[0] for w in weights]


def forward(weights: list, inputs) -> ForwardTrace:
    """Forward pass keeping every intermediate needed for backprop."""
    inputs = as_matrix(inputs)
    if inputs.shape[1] != weights[0].shape[1]:
        raise ShapeError(
            f"input dim {inputs.shape[1]} != first layer fan-in {weights[0].shape[1]}"
        )
    pre, post = [], []
    h = inputs
    for l, w in enumerate(weights):
        z = h @ w.T
        pre.append(z)
        if l < len(weights) - 1:
            h = np.maximum(z, 0.0)
            post.append(h)
    check_finite(pre[-1], "logits")
    return ForwardTrace(inputs=inputs, pre_activations=pre, post_activations=post)


def backward(weights: list, trace: ForwardTrace, logit_grad):
    """Exact reverse-mode gradients.

    Returns (weight_grads, input_grad) for the scalar whose gradient with
    respect to the logits is `logit_grad` (n x K).
    """
    logit_grad = as_matrix(logit_grad)
    if logit_grad.shape != trace.logits.shape:
        raise ShapeError(
            f"logit_grad shape {logit_grad.shape} != logits shape {trace.logits.shape}"
        )
    L = len(weights)
    weight_grads = [None] * L
    delta = logit_grad
    for l in range(L - 1, -1, -1):
        h_prev = trace.post_activations[l - 1] if l > 0 else trace.inputs
        weight_grads[l] = delta.T @ h_prev
        delta = delta @ weights[l]
        if l > 0:
            delta = delta * (trace.pre_activations[l - 1] > 0.0)
    return weight_grads, delta


def save_checkpoint(weights: list, path) -> None:
    widths = widths_of(weights)
    with open(path, "wb") as fh:
        fh.write(CHECKPOINT_MAGIC)
        fh.write(struct.pack("<B", CHECKPOINT_VERSION))
        fh.write(struct.pack("<I", len(widths)))
        fh.write(struct.pack(f"<{len(widths)}I", *widths))
        for w in weights:
            fh.write(np.ascontiguousarray(w, dtype="<f8").tobytes())


def load_checkpoint(path) -> list:
    raw = Path(path).read_bytes()
    if raw[:4] != CHECKPOINT_MAGIC:
        raise ValueError(f"bad checkpoint magic {raw[:4]!r}")
    version = raw[4]
    if version != CHECKPOINT_VERSION:
        raise ValueError(f"unsupported checkpoint version {version}")
    (nw,) = struct.unpack("<I", raw[5:9])
    widths = struct.unpack(f"<{nw}I", raw[9 : 9 + 4 * nw])
    offset = 9 + 4 * nw
    weights = []
    for l in range(1, nw):
        count = widths[l] * widths[l - 1]
        w = np.frombuffer(raw, dtype="<f8", count=count, offset=offset)
        weights.append(w.reshape(widths[l], widths[l - 1]).copy())
        offset += 8 * count
    return weights
