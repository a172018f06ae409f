"""Rating-class probability model over normalized segment returns.

The pieces fit together as: raw predicted returns are normalized to [0, 1]
against the labeled dataset's min/max, class boundaries are fit in that
normalized space so each class captures as many training returns as the
labeler assigned to it, and a softmax over per-class quadratic scores turns
a normalized return into a distribution over rating classes. The training
loss is multi-class cross-entropy against the observed class.

All functions are pure; boundary fitting takes a snapshot of the data.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

# Below this spread, dataset min and max are considered equal and every
# return normalizes to 0.5 (keeps all classes symmetric and reachable).
DEGENERATE_SPAN = 1e-12


@dataclass(frozen=True)
class ReturnNormalizer:
    """Maps raw predicted returns onto [0, 1] using dataset min/max."""

    r_min: float
    r_max: float

    def __post_init__(self):
        if not (np.isfinite(self.r_min) and np.isfinite(self.r_max)):
            raise ValueError("normalizer bounds must be finite")
        if self.r_min > self.r_max:
            raise ValueError(f"r_min {self.r_min} > r_max {self.r_max}")

    @staticmethod
    def from_returns(returns: np.ndarray) -> "ReturnNormalizer":
        returns = np.asarray(returns, dtype=np.float64)
        if returns.size == 0:
            raise ValueError("cannot fit a normalizer to an empty return set")
        if not np.isfinite(returns).all():
            raise ValueError("non-finite return in normalizer fit")
        return ReturnNormalizer(float(returns.min()), float(returns.max()))

    @property
    def span(self) -> float:
        return self.r_max - self.r_min

    def normalize(self, raw):
        """Dataset min maps to 0, max to 1; out-of-range inputs are clamped.

        A degenerate dataset (max == min) maps everything to 0.5.
        """
        raw = np.asarray(raw, dtype=np.float64)
        if not np.isfinite(raw).all():
            raise ValueError("non-finite return passed to normalize")
        if self.span < DEGENERATE_SPAN:
            out = np.full_like(raw, 0.5)
        else:
            out = np.clip((raw - self.r_min) / self.span, 0.0, 1.0)
        return float(out) if out.ndim == 0 else out

    def normalize_with_grad_mask(self, raw: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """normalize() plus d(normalized)/d(raw), zero where the clamp is active
        or the span is degenerate."""
        raw = np.asarray(raw, dtype=np.float64)
        if self.span < DEGENERATE_SPAN:
            return np.full_like(raw, 0.5), np.zeros_like(raw)
        unclamped = (raw - self.r_min) / self.span
        inside = (unclamped >= 0.0) & (unclamped <= 1.0)
        return np.clip(unclamped, 0.0, 1.0), inside / self.span


@dataclass(frozen=True)
class ClassBoundaries:
    """Ordered thresholds in normalized-return space; first is 0, last is 1.

    n classes have n+1 thresholds; class i spans [values[i], values[i+1]].
    """

    values: tuple[float, ...]

    def __post_init__(self):
        v = self.values
        if len(v) < 2:
            raise ValueError("boundaries need at least 2 thresholds (1 class)")
        if v[0] != 0.0 or v[-1] != 1.0:
            raise ValueError("boundary endpoints must be exactly 0 and 1")
        if any(b > a for a, b in zip(v[1:], v[:-1])):
            raise ValueError(f"boundaries must be non-decreasing, got {v}")

    @property
    def n_classes(self) -> int:
        return len(self.values) - 1

    def as_array(self) -> np.ndarray:
        return np.asarray(self.values, dtype=np.float64)

    @staticmethod
    def equal_width(n: int) -> "ClassBoundaries":
        return ClassBoundaries(tuple(np.linspace(0.0, 1.0, n + 1).tolist()))


def fit_boundaries(sorted_norm_returns, class_counts) -> ClassBoundaries:
    """Fit class boundaries so each class interval captures as many training
    returns as were labeled into it.

    Interior threshold i is the midpoint of the two sorted returns that
    straddle the cumulative label count below class i. A class with no
    labels collapses to zero width: its upper threshold equals its lower
    one (0 or 1 when the empty classes sit at the ends).
    """
    vals = np.asarray(sorted_norm_returns, dtype=np.float64)
    counts = np.asarray(class_counts, dtype=np.int64)
    if counts.ndim != 1 or counts.size < 1:
        raise ValueError("class_counts must be a non-empty 1-d sequence")
    if (counts < 0).any():
        raise ValueError("class counts must be non-negative")
    total = int(counts.sum())
    if total != vals.size:
        raise ValueError(f"counts sum to {total} but {vals.size} returns were given")
    if total < 1:
        raise ValueError("need at least one labeled return to fit boundaries")
    if (np.diff(vals) < 0).any():
        raise ValueError("returns must be sorted ascending")
    if vals.min() < 0.0 or vals.max() > 1.0:
        raise ValueError("normalized returns must lie in [0, 1]")

    n = counts.size
    cumulative = np.cumsum(counts)
    thresholds = [0.0]
    for i in range(1, n):
        below = int(cumulative[i - 1])
        if below <= 0:
            thresholds.append(0.0)
        elif below >= total:
            thresholds.append(1.0)
        else:
            thresholds.append(0.5 * (vals[below - 1] + vals[below]))
    thresholds.append(1.0)
    return ClassBoundaries(tuple(thresholds))


def class_scores(norm_return, boundaries: ClassBoundaries, sharpness: float) -> np.ndarray:
    """Pre-softmax score of each class: -sharpness * (x - lo_i) * (x - hi_i).

    Positive exactly when x lies strictly inside class i's interval, so the
    containing class wins the softmax.
    """
    if sharpness <= 0:
        raise ValueError("sharpness must be positive")
    x = np.asarray(norm_return, dtype=np.float64)
    b = boundaries.as_array()
    lo, hi = b[:-1], b[1:]
    x_col = x[..., None]
    return -sharpness * (x_col - lo) * (x_col - hi)


def class_probabilities(norm_return, boundaries: ClassBoundaries, sharpness: float) -> np.ndarray:
    """Distribution over rating classes for one or many normalized returns.

    Softmax of class_scores with max-subtraction, so large sharpness values
    (up to ~1e4) cannot overflow. Output rows sum to 1 and are strictly
    positive.
    """
    scores = class_scores(norm_return, boundaries, sharpness)
    shifted = scores - scores.max(axis=-1, keepdims=True)
    exp = np.exp(shifted)
    return exp / exp.sum(axis=-1, keepdims=True)


def predict_class(norm_return: float, boundaries: ClassBoundaries, sharpness: float) -> int:
    """Most probable rating class; exact ties go to the lower index."""
    probs = class_probabilities(float(norm_return), boundaries, sharpness)
    return int(np.argmax(probs))


def rating_loss(norm_returns, observed_classes, boundaries: ClassBoundaries, sharpness: float) -> float:
    """Cross-entropy of the observed classes under the class-probability
    model, summed over the batch."""
    x = np.atleast_1d(np.asarray(norm_returns, dtype=np.float64))
    classes = np.atleast_1d(np.asarray(observed_classes, dtype=np.int64))
    if x.shape != classes.shape:
        raise ValueError("one observed class per return required")
    if classes.min(initial=0) < 0 or classes.max(initial=0) >= boundaries.n_classes:
        raise ValueError("observed class out of range")
    scores = class_scores(x, boundaries, sharpness)
    shifted = scores - scores.max(axis=-1, keepdims=True)
    log_z = np.log(np.exp(shifted).sum(axis=-1))
    log_q = shifted[np.arange(x.size), classes] - log_z
    return float(-log_q.sum())


def rating_loss_grad(norm_returns, observed_classes, boundaries: ClassBoundaries, sharpness: float) -> tuple[float, np.ndarray]:
    """rating_loss plus its gradient w.r.t. each normalized return.

    Boundaries and sharpness are treated as constants; only the normalized
    return carries gradient.
    """
    x = np.atleast_1d(np.asarray(norm_returns, dtype=np.float64))
    classes = np.atleast_1d(np.asarray(observed_classes, dtype=np.int64))
    scores = class_scores(x, boundaries, sharpness)
    shifted = scores - scores.max(axis=-1, keepdims=True)
    exp = np.exp(shifted)
    probs = exp / exp.sum(axis=-1, keepdims=True)
    log_q = shifted[np.arange(x.size), classes] - np.log(exp.sum(axis=-1))
    loss = float(-log_q.sum())

    b = boundaries.as_array()
    lo, hi = b[:-1], b[1:]
    # d(score_j)/dx = -sharpness * (2x - lo_j - hi_j)
    dscores = -sharpness * (2.0 * x[..., None] - lo - hi)
    grad = (probs * dscores).sum(axis=-1) - dscores[np.arange(x.size), classes]
    return loss, grad
