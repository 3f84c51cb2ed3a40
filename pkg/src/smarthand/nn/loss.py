"""Softmax and cross-entropy with the standard max-subtraction stabilization."""

import numpy as np

from ..errors import ValidationError


def softmax(logits):
    z = np.asarray(logits)
    if z.ndim != 2:
        raise ValidationError(f"softmax: expected (N, C) logits, got {z.shape}")
    z = z - z.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def cross_entropy(logits, labels):
    """Mean negative log-likelihood over the batch.

    Returns (loss, grad_logits); grad already carries the 1/N factor so it
    feeds straight into backward passes.
    """
    z = np.asarray(logits)
    if z.ndim != 2:
        raise ValidationError(f"cross_entropy: expected (N, C) logits, got {z.shape}")
    labels = np.asarray(labels)
    if labels.shape != (z.shape[0],):
        raise ValidationError(
            f"cross_entropy: expected {z.shape[0]} labels, got shape {labels.shape}"
        )
    if labels.size and (labels.min() < 0 or labels.max() >= z.shape[1]):
        raise ValidationError(
            f"cross_entropy: labels must be in [0, {z.shape[1] - 1}]"
        )
    n = z.shape[0]
    if n == 0:
        raise ValidationError("cross_entropy: empty batch")
    m = z.max(axis=1, keepdims=True)
    shifted = z - m
    lse = np.log(np.exp(shifted).sum(axis=1))
    picked = shifted[np.arange(n), labels]
    loss = float((lse - picked).mean())
    grad = softmax(z)
    grad[np.arange(n), labels] -= 1.0
    return loss, grad / n
