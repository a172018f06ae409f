"""Synthetic label sources: ratings against evenly spaced ground-truth
boundaries, and preferences by ground-truth return comparison.

Human labelers answer the same queries through the HTTP service; these
classes are the reproducible stand-ins.
"""

from __future__ import annotations

import math

import numpy as np

from .envs import EnvSpec
from .reward import discount_weights
from .segments import Segment


def attainable_segment_return_range(spec: EnvSpec, segment_len: int, gamma: float) -> tuple[float, float]:
    """Lowest and highest discounted return any segment can achieve, from
    the env's declared per-step reward bounds."""
    if not (math.isfinite(spec.reward_low) and math.isfinite(spec.reward_high)):
        raise ValueError(f"env {spec.name} has unbounded rewards; configure explicit bounds")
    total = float(discount_weights(segment_len, gamma).sum())
    return spec.reward_low * total, spec.reward_high * total


class SyntheticRatingTeacher:
    """Rates a segment by locating its ground-truth return among boundaries
    evenly spaced over the attainable segment-return range."""

    def __init__(self, n_classes: int, return_range: tuple[float, float],
                 noise_temp: float | None = None, seed: int = 0):
        if n_classes < 1:
            raise ValueError("need at least one rating class")
        lo, hi = float(return_range[0]), float(return_range[1])
        if not lo < hi:
            raise ValueError(f"return range must be increasing, got ({lo}, {hi})")
        self.n_classes = int(n_classes)
        self.gt_boundaries = np.linspace(lo, hi, self.n_classes + 1)
        self.noise_temp = noise_temp
        self._rng = np.random.default_rng(seed)

    @staticmethod
    def for_env(spec: EnvSpec, n_classes: int, segment_len: int, gamma: float,
                noise_temp: float | None = None, seed: int = 0) -> "SyntheticRatingTeacher":
        return SyntheticRatingTeacher(
            n_classes, attainable_segment_return_range(spec, segment_len, gamma),
            noise_temp=noise_temp, seed=seed,
        )

    def rate(self, segment: Segment) -> int:
        """Class i such that the return falls in [b_i, b_{i+1}); the top
        interval is closed on the right."""
        if segment.gt_return is None:
            raise ValueError(f"segment {segment.id} has no ground-truth return; "
                             "only collected segments can reach the synthetic teacher")
        idx = int(np.searchsorted(self.gt_boundaries, segment.gt_return, side="right")) - 1
        idx = min(max(idx, 0), self.n_classes - 1)
        if self.noise_temp is not None:
            idx = self._maybe_mislabel(segment.gt_return, idx)
        return idx

    def _maybe_mislabel(self, gt_return: float, idx: int) -> int:
        # flip toward the nearest interior boundary with probability decaying
        # in the distance to it; robustness experiments only
        interior = self.gt_boundaries[1:-1]
        if interior.size == 0:
            return idx
        nearest = int(np.argmin(np.abs(interior - gt_return)))
        dist = abs(float(interior[nearest]) - gt_return)
        if self._rng.random() < 0.5 * math.exp(-dist / self.noise_temp):
            neighbour = nearest if interior[nearest] > gt_return else nearest + 1
            if neighbour == idx and idx > 0:
                neighbour = idx - 1
            return min(max(neighbour, 0), self.n_classes - 1)
        return idx


class SyntheticPreferenceTeacher:
    """Prefers the segment with the strictly higher ground-truth return;
    exact ties are broken by a seeded coin flip."""

    def __init__(self, seed: int = 0):
        self._rng = np.random.default_rng(seed)

    def prefer(self, first: Segment, second: Segment) -> str:
        for seg in (first, second):
            if seg.gt_return is None:
                raise ValueError(f"segment {seg.id} has no ground-truth return")
        if first.gt_return > second.gt_return:
            return "first"
        if second.gt_return > first.gt_return:
            return "second"
        return "first" if self._rng.random() < 0.5 else "second"
