"""Shared numerics: stable sigmoid/logit and the binary cross-entropy loss."""

from __future__ import annotations

import numpy as np

PROB_CLAMP = 1e-15


def sigmoid(z):
    """Numerically stable logistic function, vectorized."""
    z = np.asarray(z, dtype=np.float64)
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def logit(p, clamp: float = PROB_CLAMP):
    """Inverse sigmoid with probabilities clamped away from 0 and 1."""
    p = np.clip(np.asarray(p, dtype=np.float64), clamp, 1.0 - clamp)
    return np.log(p / (1.0 - p))


def binary_logloss(p, y, clamp: float = PROB_CLAMP) -> float:
    """Mean negative log likelihood of labels y under probabilities p."""
    p = np.clip(np.asarray(p, dtype=np.float64), clamp, 1.0 - clamp)
    y = np.asarray(y, dtype=np.float64)
    if p.shape != y.shape:
        raise ValueError(f"shape mismatch: predictions {p.shape} vs labels {y.shape}")
    if p.size == 0:
        raise ValueError("need at least one prediction")
    return float(-np.mean(y * np.log(p) + (1.0 - y) * np.log(1.0 - p)))
