"""FGSM and k-step PGD under l-inf / l2 balls with [0,1] clipping.

PGD performs fixed-size gradient-ascent steps on the mean CE loss, each
followed by projection onto the epsilon-ball around the clean input and
a clamp into [0,1]^d.  With track_best the per-sample iterate with
maximal CE is returned, and the clean start is always a candidate, so
CE(output) >= CE(clean) holds per sample by construction.

Defaults follow the common l-inf setting eps=8/255, alpha=2/255, k=10.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import ParameterError, ShapeError, as_matrix
from .data import LabeledBatch
from .mlp import backward, forward
from .objectives import ce_logit_grad, ce_loss


@dataclass(frozen=True)
class AttackSpec:
    p: str = "inf"  # "inf" | "two"
    eps: float = 8.0 / 255.0
    alpha: float = 2.0 / 255.0
    k: int = 10
    random_start: bool = False
    track_best: bool = True

    def __post_init__(self):
        if self.p not in ("inf", "two"):
            raise ParameterError("p must be 'inf' or 'two'")
        if self.eps < 0 or self.alpha <= 0 or self.k < 1:
            raise ParameterError("require eps >= 0, alpha > 0, k >= 1")


def project(x0, x, p: str, eps: float) -> np.ndarray:
    """Project x onto the eps-ball around x0, then clamp into [0,1]."""
    x0 = as_matrix(x0)
    x = as_matrix(x)
    if x0.shape != x.shape:
        raise ShapeError(f"shape mismatch {x0.shape} vs {x.shape}")
    if p == "inf":
        x = np.clip(x, x0 - eps, x0 + eps)
    elif p == "two":
        delta = x - x0
        norms = np.linalg.norm(delta, axis=1, keepdims=True)
        scale = np.where(norms > eps, eps / np.maximum(norms, 1e-300), 1.0)
        x = x0 + delta * scale
    else:
        raise ParameterError("p must be 'inf' or 'two'")
    return np.clip(x, 0.0, 1.0)


def _input_grad(weights: list, inputs: np.ndarray, labels: np.ndarray) -> np.ndarray:
    trace = forward(weights, inputs)
    logit_grad = ce_logit_grad(trace.logits, labels)
    _, input_grad = backward(weights, trace, logit_grad)
    return input_grad


def fgsm(weights: list, batch: LabeledBatch, eps: float) -> np.ndarray:
    """Single saturated signed-gradient step; sign(0) contributes 0."""
    if eps < 0:
        raise ParameterError("eps must be >= 0")
    grad = _input_grad(weights, batch.inputs, batch.labels)
    return np.clip(batch.inputs + eps * np.sign(grad), 0.0, 1.0)


def pgd(weights: list, batch: LabeledBatch, spec: AttackSpec,
        rng: np.random.Generator | None = None) -> np.ndarray:
    """k-step projected gradient ascent on CE inside the eps-ball."""
    x0 = batch.inputs
    labels = batch.labels
    if spec.eps == 0.0:
        return x0.copy()
    if spec.random_start:
        if rng is None:
            raise ParameterError("random_start requires an rng")
        if spec.p == "inf":
            x = x0 + rng.uniform(-spec.eps, spec.eps, size=x0.shape)
        else:
            direction = rng.standard_normal(x0.shape)
            direction /= np.maximum(np.linalg.norm(direction, axis=1, keepdims=True), 1e-300)
            radius = spec.eps * rng.uniform(0.0, 1.0, size=(x0.shape[0], 1)) ** (1.0 / x0.shape[1])
            x = x0 + radius * direction
        x = project(x0, x, spec.p, spec.eps)
    else:
        x = x0.copy()

    best_x = x0.copy()
    best_loss, _ = ce_loss(forward(weights, x0).logits, labels)
    if spec.track_best and spec.random_start:
        start_loss, _ = ce_loss(forward(weights, x).logits, labels)
        improved = start_loss > best_loss
        best_x[improved] = x[improved]
        best_loss = np.maximum(best_loss, start_loss)

    for _ in range(spec.k):
        grad = _input_grad(weights, x, labels)
        if spec.p == "inf":
            x = x + spec.alpha * np.sign(grad)
        else:
            norms = np.linalg.norm(grad, axis=1, keepdims=True)
            x = x + spec.alpha * grad / np.maximum(norms, 1e-300)
        x = project(x0, x, spec.p, spec.eps)
        if spec.track_best:
            loss, _ = ce_loss(forward(weights, x).logits, labels)
            improved = loss > best_loss
            best_x[improved] = x[improved]
            best_loss = np.maximum(best_loss, loss)

    return best_x if spec.track_best else x
