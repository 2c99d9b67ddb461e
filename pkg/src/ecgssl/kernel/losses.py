"""Loss functions: binary cross-entropy per pretext task, weighted multi-task
aggregation, categorical cross-entropy for the downstream classifier, and the
L2 penalty on dense weights."""

from __future__ import annotations

import numpy as np

from ..errors import ParameterError

PROB_CLAMP = 1e-7


def _clamp(p: np.ndarray) -> np.ndarray:
    return np.clip(p, PROB_CLAMP, 1.0 - PROB_CLAMP)


def bce_loss(prob: np.ndarray, label: np.ndarray) -> np.ndarray:
    """Elementwise negated binary cross-entropy, -[y log p + (1-y) log(1-p)]."""
    p = _clamp(np.asarray(prob))
    y = np.asarray(label)
    return -(y * np.log(p) + (1 - y) * np.log1p(-p))


def bce_loss_backward(prob: np.ndarray, label: np.ndarray) -> np.ndarray:
    """Gradient of bce_loss w.r.t. the (clamped) probability."""
    p = _clamp(np.asarray(prob))
    y = np.asarray(label)
    return (p - y) / (p * (1 - p))


def multitask_loss(per_task_losses: np.ndarray, alphas: np.ndarray) -> float:
    """Weighted total pretext loss, sum_j alpha_j * L_j."""
    alphas = np.asarray(alphas, dtype=np.float64)
    if np.any(alphas < 0) or not np.any(alphas > 0):
        raise ParameterError("alphas must be non-negative and not all zero")
    losses = np.asarray(per_task_losses, dtype=np.float64)
    if losses.shape != alphas.shape:
        raise ParameterError(f"losses {losses.shape} vs alphas {alphas.shape}")
    return float(np.dot(alphas, losses))


def cross_entropy(probs: np.ndarray, onehot: np.ndarray) -> np.ndarray:
    """Per-row negated cross-entropy, -sum_i y_i log p_i. probs: (B, M)."""
    p = _clamp(np.asarray(probs))
    return -(np.asarray(onehot) * np.log(p)).sum(axis=-1)


def cross_entropy_backward(probs: np.ndarray, onehot: np.ndarray) -> np.ndarray:
    p = _clamp(np.asarray(probs))
    return -np.asarray(onehot) / p


def l2_penalty(weights: list[np.ndarray], beta: float) -> float:
    """beta * sum of squared entries over the given (dense weight) arrays."""
    if beta < 0:
        raise ParameterError("beta must be non-negative")
    return beta * float(sum(np.sum(np.square(w, dtype=np.float64)) for w in weights))


def l2_penalty_grad(weight: np.ndarray, beta: float) -> np.ndarray:
    """Gradient contribution of the L2 penalty for one weight array: 2*beta*w."""
    return (2.0 * beta) * weight
