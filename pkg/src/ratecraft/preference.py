"""Pairwise-preference reward loss (Bradley-Terry), the comparison baseline.

Probability that the first segment of a pair is preferred is the logistic
of the predicted-return difference; the loss is cross-entropy against the
observed side.
"""

from __future__ import annotations

import numpy as np
from scipy.special import expit


def preference_probability(return_a, return_b):
    """P(first preferred) = logistic(return_a - return_b), overflow-safe."""
    a = np.asarray(return_a, dtype=np.float64)
    b = np.asarray(return_b, dtype=np.float64)
    if not (np.isfinite(a).all() and np.isfinite(b).all()):
        raise ValueError("preference probability needs finite returns")
    p = expit(a - b)
    return float(p) if p.ndim == 0 else p


def preference_loss(returns_a, returns_b, first_preferred) -> float:
    """-sum log P(observed side). first_preferred is a bool per pair."""
    loss, _, _ = preference_loss_grad(returns_a, returns_b, first_preferred)
    return loss


def preference_loss_grad(returns_a, returns_b, first_preferred) -> tuple[float, np.ndarray, np.ndarray]:
    """Loss plus gradients w.r.t. both return vectors.

    Uses log(1 + e^x) directly instead of log(P) so extreme return
    differences stay finite.
    """
    a = np.atleast_1d(np.asarray(returns_a, dtype=np.float64))
    b = np.atleast_1d(np.asarray(returns_b, dtype=np.float64))
    y = np.atleast_1d(np.asarray(first_preferred, dtype=np.float64))
    if not (a.shape == b.shape == y.shape):
        raise ValueError("returns_a, returns_b and first_preferred must align")
    diff = a - b
    # -log P(a) = softplus(-diff); -log P(b) = softplus(diff)
    per_pair = np.where(y > 0.5, np.logaddexp(0.0, -diff), np.logaddexp(0.0, diff))
    grad_a = expit(diff) - y
    return float(per_pair.sum()), grad_a, -grad_a
