"""Losses, risk accounting, and the cross-algorithm generalization gap.

Cross-entropy is computed as logsumexp(logits) - logits[y] with max
subtraction, so it is exact under arbitrary logit shifts.  Accuracy uses
argmax with lowest-index tie-breaking (numpy's argmax convention), which
also fixes the correct/misclassified split used by the radius metrics.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from .core import ParameterError, ShapeError, as_matrix, softmax_rows
from .data import LabeledBatch
from .mlp import forward


@dataclass(frozen=True)
class ObjectiveSpec:
    kind: str = "mixture"  # "standard" | "mixture" | "trades"
    lam: float = 1.0       # mixture weight on the adversarial branch
    beta: float = 6.0      # TRADES trade-off factor

    def __post_init__(self):
        if self.kind not in ("standard", "mixture", "trades"):
            raise ParameterError("kind must be standard, mixture, or trades")
        if not 0.0 <= self.lam <= 1.0:
            raise ParameterError("lam must lie in [0, 1]")
        if self.beta <= 0.0:
            raise ParameterError("beta must be > 0")

    @property
    def needs_attack(self) -> bool:
        return self.kind == "trades" or (self.kind == "mixture" and self.lam > 0.0)


@dataclass(frozen=True)
class RiskReport:
    mean_loss: float
    accuracy: float
    n: int
    correct_mask: np.ndarray


def _check_labels(logits: np.ndarray, labels: np.ndarray) -> np.ndarray:
    labels = np.asarray(labels, dtype=np.int64)
    if labels.ndim != 1 or labels.shape[0] != logits.shape[0]:
        raise ShapeError("labels must be a vector matching logits rows")
    if labels.min() < 0 or labels.max() >= logits.shape[1]:
        raise ParameterError("label out of range for K classes")
    return labels


def ce_loss(logits, labels):
    """Per-sample and mean cross-entropy from raw logits."""
    logits = as_matrix(logits)
    labels = _check_labels(logits, labels)
    per_sample = logsumexp(logits, axis=1) - logits[np.arange(len(labels)), labels]
    return per_sample, float(per_sample.mean())


def ce_logit_grad(logits, labels) -> np.ndarray:
    """Gradient of each sample's CE with respect to its logits: softmax - onehot."""
    logits = as_matrix(logits)
    labels = _check_labels(logits, labels)
    grad = softmax_rows(logits)
    grad[np.arange(len(labels)), labels] -= 1.0
    return grad


def correct_mask(logits, labels) -> np.ndarray:
    logits = as_matrix(logits)
    labels = _check_labels(logits, labels)
    return logits.argmax(axis=1) == labels


def risk(weights: list, batch: LabeledBatch) -> RiskReport:
    """Empirical CE risk and accuracy of a model on a batch."""
    logits = forward(weights, batch.inputs).logits
    _, mean = ce_loss(logits, batch.labels)
    mask = correct_mask(logits, batch.labels)
    return RiskReport(mean_loss=mean, accuracy=float(mask.mean()), n=batch.n, correct_mask=mask)


def mixture_from_logits(clean_logits, adv_logits, labels, lam: float):
    """Mixture objective evaluated on precomputed logits.

    Returns (loss, clean_logit_grad, adv_logit_grad); gradient matrices
    are for the scalar mean loss (weighting and 1/n included).
    """
    if not 0.0 <= lam <= 1.0:
        raise ParameterError("lam must lie in [0, 1]")
    _, clean_mean = ce_loss(clean_logits, labels)
    _, adv_mean = ce_loss(adv_logits, labels)
    loss = (1.0 - lam) * clean_mean + lam * adv_mean
    n = as_matrix(clean_logits).shape[0]
    clean_grad = (1.0 - lam) / n * ce_logit_grad(clean_logits, labels)
    adv_grad = lam / n * ce_logit_grad(adv_logits, labels)
    return loss, clean_grad, adv_grad


def mixture_objective(weights: list, batch: LabeledBatch, lam: float, adv_inputs):
    """Weighted clean/adversarial CE: (1-lam)*CE(x) + lam*CE(x').

    lam=0 is standard training, lam=1 is PGD-AT.
    """
    clean = forward(weights, batch.inputs)
    adv = forward(weights, adv_inputs)
    return mixture_from_logits(clean.logits, adv.logits, batch.labels, lam)


def kl_rows(p_logits, q_logits) -> np.ndarray:
    """Row-wise KL(softmax(p) || softmax(q)) in stable log domain."""
    p_logits = as_matrix(p_logits)
    q_logits = as_matrix(q_logits)
    log_p = p_logits - logsumexp(p_logits, axis=1, keepdims=True)
    log_q = q_logits - logsumexp(q_logits, axis=1, keepdims=True)
    return (np.exp(log_p) * (log_p - log_q)).sum(axis=1)


def trades_from_logits(clean_logits, adv_logits, labels, beta: float):
    """TRADES objective on precomputed logits: CE(clean) + beta*KL(adv||clean)."""
    if beta <= 0.0:
        raise ParameterError("beta must be > 0")
    clean_logits = as_matrix(clean_logits)
    adv_logits = as_matrix(adv_logits)
    _, ce_mean = ce_loss(clean_logits, labels)
    kl = kl_rows(adv_logits, clean_logits)
    loss = ce_mean + beta * float(kl.mean())
    n = clean_logits.shape[0]
    p = softmax_rows(adv_logits)
    q = softmax_rows(clean_logits)
    # d KL / d clean logits = q - p; d KL / d adv logits through softmax(p)
    clean_grad = (ce_logit_grad(clean_logits, labels) + beta * (q - p)) / n
    log_p = adv_logits - logsumexp(adv_logits, axis=1, keepdims=True)
    log_q = clean_logits - logsumexp(clean_logits, axis=1, keepdims=True)
    r = log_p - log_q
    adv_grad = beta / n * p * (r - (r * p).sum(axis=1, keepdims=True))
    return loss, clean_grad, adv_grad


def trades_objective(weights: list, batch: LabeledBatch, beta: float, adv_inputs):
    """CE(clean) + beta * mean KL(softmax(adv) || softmax(clean)).

    Returns (loss, clean_logit_grad, adv_logit_grad) for the mean loss.
    """
    clean = forward(weights, batch.inputs)
    adv = forward(weights, adv_inputs)
    return trades_from_logits(clean.logits, adv.logits, batch.labels, beta)


def generalization_gap(family_a_risks, family_b_risks) -> float:
    """min over family a of test risk minus min over family b (signed)."""
    if len(family_a_risks) == 0 or len(family_b_risks) == 0:
        raise ParameterError("both families need at least one trained model")
    return float(min(family_a_risks) - min(family_b_risks))


def generalization_bound(emp_risk: float, B: float, rademacher: float, delta: float, n: int) -> float:
    """High-probability population-risk bound for a loss bounded in [0, B].

    emp_risk + 2B*rademacher + 3B*sqrt(ln(2/delta)/(2n)).  Only valid for
    bounded losses; never applied to (unbounded) CE in this package.
    """
    if B <= 0:
        raise ParameterError("B must be > 0")
    if not 0.0 < delta < 1.0:
        raise ParameterError("delta must lie in (0, 1)")
    if n < 1:
        raise ParameterError("n must be >= 1")
    return emp_risk + 2.0 * B * rademacher + 3.0 * B * np.sqrt(np.log(2.0 / delta) / (2.0 * n))
