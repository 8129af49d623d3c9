"""Logit-oriented regularization (SLORE / LORE) and its epoch schedule.

All penalties consume softmax outputs, never raw logits.  Writing m_i for
the mean of the non-label probabilities of sample i and s for softmax
rows:

  P_C      = mean over correct i of (1/(K-1)) sum_{k != y} (s_k - s_y)^2
  P_C_low  = same with s_y replaced by m_i            (always <= P_C)
  P_M      = mean over wrong i of (1/(K-1)) sum_{k != y} (s_k - s_y)^2
  jensen   = mean over wrong i of (m_i - s_y)^2       (always <= P_M)
  P_M_low  = mean over wrong i of (1/(K-1)) sum_{k != y} (s_k - m_i)^2
  AP_C/M   = mean over correct/wrong i of ||s_clean,i - s_adv,i||_2^2

The scheduled loss adds tau*(P_C_low - P_M_low) in early epochs
(epoch <= E1), the negated difference in late epochs (epoch >= E2), and
nothing in between; the LORE variant additionally adds gamma*AP_M early
and gamma*AP_C late.  A penalty whose sample subset is empty contributes
zero for that batch.

Correct/wrong masks come from clean logits and are treated as
stop-gradient constants (argmax has no useful derivative).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import ParameterError, ShapeError, as_matrix, softmax_rows


class EmptySubsetError(ValueError):
    """The masked sample subset for a penalty is empty."""


@dataclass(frozen=True)
class LoatSchedule:
    e1: int = 1
    e2: int = 100
    tau: float = 1.0
    gamma: float = 0.05
    variant: str = "OFF"  # "SLORE" | "LORE" | "OFF"

    def __post_init__(self):
        if self.variant not in ("SLORE", "LORE", "OFF"):
            raise ParameterError("variant must be SLORE, LORE, or OFF")
        if self.e1 > self.e2:
            raise ParameterError("require e1 <= e2")
        if self.tau < 0 or self.gamma < 0:
            raise ParameterError("tau and gamma must be >= 0")


@dataclass(frozen=True)
class PenaltyReport:
    p_c: float | None = None
    p_m: float | None = None
    p_c_lower: float | None = None
    p_m_lower: float | None = None
    ap_c: float | None = None
    ap_m: float | None = None


def _nonlabel_mean(probs: np.ndarray, labels: np.ndarray) -> np.ndarray:
    k = probs.shape[1]
    label_p = probs[np.arange(len(labels)), labels]
    return (probs.sum(axis=1) - label_p) / (k - 1)


def _sq_dev_from_label(probs, labels) -> np.ndarray:
    """Per-sample (1/(K-1)) sum_{k != y} (s_k - s_y)^2."""
    k = probs.shape[1]
    label_p = probs[np.arange(len(labels)), labels]
    dev = (probs - label_p[:, None]) ** 2
    dev[np.arange(len(labels)), labels] = 0.0
    return dev.sum(axis=1) / (k - 1)


def _sq_dev_from_mean(probs, labels) -> np.ndarray:
    """Per-sample (1/(K-1)) sum_{k != y} (s_k - m)^2 with m the non-label mean."""
    k = probs.shape[1]
    m = _nonlabel_mean(probs, labels)
    dev = (probs - m[:, None]) ** 2
    dev[np.arange(len(labels)), labels] = 0.0
    return dev.sum(axis=1) / (k - 1)


def _validate(probs, labels, mask):
    probs = as_matrix(probs)
    labels = np.asarray(labels, dtype=np.int64)
    mask = np.asarray(mask, dtype=bool)
    if labels.shape[0] != probs.shape[0] or mask.shape[0] != probs.shape[0]:
        raise ShapeError("labels/mask must match probs rows")
    return probs, labels, mask


def penalty_correct(probs, labels, mask):
    """(P_C, P_C_lower) over the correct subset; raises if it is empty."""
    probs, labels, mask = _validate(probs, labels, mask)
    if not mask.any():
        raise EmptySubsetError("no correctly classified samples in batch")
    p_c = float(_sq_dev_from_label(probs, labels)[mask].mean())
    p_c_lower = float(_sq_dev_from_mean(probs, labels)[mask].mean())
    return p_c, p_c_lower


def penalty_wrong(probs, labels, mask):
    """(P_M, P_M_lower) over the misclassified subset; raises if it is empty."""
    probs, labels, mask = _validate(probs, labels, mask)
    wrong = ~mask
    if not wrong.any():
        raise EmptySubsetError("no misclassified samples in batch")
    p_m = float(_sq_dev_from_label(probs, labels)[wrong].mean())
    p_m_lower = float(_sq_dev_from_mean(probs, labels)[wrong].mean())
    return p_m, p_m_lower


def jensen_middle_wrong(probs, labels, mask) -> float:
    """Jensen intermediate term: mean over wrong i of (m_i - s_y)^2."""
    probs, labels, mask = _validate(probs, labels, mask)
    wrong = ~mask
    if not wrong.any():
        raise EmptySubsetError("no misclassified samples in batch")
    m = _nonlabel_mean(probs, labels)
    label_p = probs[np.arange(len(labels)), labels]
    return float(((m - label_p) ** 2)[wrong].mean())


def adversarial_pairing(clean_probs, adv_probs, mask) -> float:
    """Mean squared l2 distance between clean and adversarial softmax rows."""
    clean_probs = as_matrix(clean_probs)
    adv_probs = as_matrix(adv_probs)
    if clean_probs.shape != adv_probs.shape:
        raise ShapeError("clean/adv probability shapes differ")
    mask = np.asarray(mask, dtype=bool)
    if not mask.any():
        raise EmptySubsetError("empty pairing subset")
    return float(((clean_probs - adv_probs) ** 2).sum(axis=1)[mask].mean())


def compute_penalties(clean_probs, labels, mask, adv_probs=None) -> PenaltyReport:
    """All penalty terms for one batch; None where a subset is empty."""
    fields = {}
    try:
        fields["p_c"], fields["p_c_lower"] = penalty_correct(clean_probs, labels, mask)
    except EmptySubsetError:
        pass
    try:
        fields["p_m"], fields["p_m_lower"] = penalty_wrong(clean_probs, labels, mask)
    except EmptySubsetError:
        pass
    if adv_probs is not None:
        mask_arr = np.asarray(mask, dtype=bool)
        if mask_arr.any():
            fields["ap_c"] = adversarial_pairing(clean_probs, adv_probs, mask_arr)
        if (~mask_arr).any():
            fields["ap_m"] = adversarial_pairing(clean_probs, adv_probs, ~mask_arr)
    return PenaltyReport(**fields)


def _phase(epoch: int, sched: LoatSchedule) -> str:
    if sched.variant == "OFF":
        return "off"
    if epoch <= sched.e1:
        return "early"
    if epoch >= sched.e2:
        return "late"
    return "off"


def loat_loss(base_loss: float, epoch: int, sched: LoatSchedule, pr: PenaltyReport) -> float:
    """Scheduled total loss; returns base_loss unchanged in the middle phase."""
    phase = _phase(epoch, sched)
    if phase == "off":
        return base_loss
    p_c = pr.p_c_lower or 0.0
    p_m = pr.p_m_lower or 0.0
    if phase == "early":
        total = base_loss + sched.tau * (p_c - p_m)
        if sched.variant == "LORE" and pr.ap_m is not None:
            total += sched.gamma * pr.ap_m
    else:
        total = base_loss + sched.tau * (p_m - p_c)
        if sched.variant == "LORE" and pr.ap_c is not None:
            total += sched.gamma * pr.ap_c
    return total


def _softmax_chain(probs: np.ndarray, d_sigma: np.ndarray) -> np.ndarray:
    """Pull a gradient w.r.t. softmax outputs back to logits."""
    return probs * (d_sigma - (d_sigma * probs).sum(axis=1, keepdims=True))


def _lower_penalty_sigma_grad(probs, labels, subset) -> np.ndarray:
    """d/d sigma of the mean-deviation penalty over `subset` rows."""
    k = probs.shape[1]
    count = int(subset.sum())
    grad = np.zeros_like(probs)
    if count == 0:
        return grad
    m = _nonlabel_mean(probs, labels)
    dev = probs - m[:, None]
    dev[np.arange(len(labels)), labels] = 0.0
    grad[subset] = (2.0 / (k - 1)) * dev[subset] / count
    return grad


def _pairing_sigma_grads(clean_probs, adv_probs, subset):
    count = int(subset.sum())
    d_clean = np.zeros_like(clean_probs)
    d_adv = np.zeros_like(adv_probs)
    if count == 0:
        return d_clean, d_adv
    diff = 2.0 * (clean_probs - adv_probs) / count
    d_clean[subset] = diff[subset]
    d_adv[subset] = -diff[subset]
    return d_clean, d_adv


def loat_grad_contrib(clean_logits, labels, mask, epoch: int, sched: LoatSchedule,
                      adv_logits=None):
    """Exact gradients of the scheduled penalty terms w.r.t. logits.

    Returns (clean_logit_grad, adv_logit_grad); the adversarial part is a
    zero matrix unless the LORE pairing term is active and adv logits
    were supplied.  Masks are constants: no gradient flows through the
    correctness indicators.
    """
    clean_logits = as_matrix(clean_logits)
    labels = np.asarray(labels, dtype=np.int64)
    mask = np.asarray(mask, dtype=bool)
    clean_grad = np.zeros_like(clean_logits)
    adv_grad = np.zeros_like(clean_logits)
    phase = _phase(epoch, sched)
    if phase == "off":
        return clean_grad, adv_grad

    probs = softmax_rows(clean_logits)
    sign = 1.0 if phase == "early" else -1.0
    d_sigma = sign * sched.tau * (
        _lower_penalty_sigma_grad(probs, labels, mask)
        - _lower_penalty_sigma_grad(probs, labels, ~mask)
    )

    if sched.variant == "LORE" and adv_logits is not None:
        adv_probs = softmax_rows(as_matrix(adv_logits))
        subset = ~mask if phase == "early" else mask
        d_clean_pair, d_adv_pair = _pairing_sigma_grads(probs, adv_probs, subset)
        d_sigma = d_sigma + sched.gamma * d_clean_pair
        adv_grad = _softmax_chain(adv_probs, sched.gamma * d_adv_pair)

    clean_grad = _softmax_chain(probs, d_sigma)
    return clean_grad, adv_grad
