"""Reward-model training: parameter gradients of the rating and preference
losses, and the per-round fitting loops.

Gradient flow follows the stop-gradient convention: normalization bounds
and class boundaries are computed from the net at the start of a round and
held fixed; gradients pass only through the per-step reward predictions
inside each segment return.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .mlp import Adam, Grads
from .preference import preference_loss_grad
from .rating import ClassBoundaries, ReturnNormalizer, fit_boundaries, rating_loss_grad
from .reward import RewardNet, discount_weights
from .segments import PreferenceDataset, RatedDataset, Segment


def _stack_segments(segments: list[Segment]) -> tuple[np.ndarray, int]:
    length = len(segments[0])
    if any(len(s) != length for s in segments):
        raise ValueError("training batches need uniform segment length")
    joined = np.concatenate(
        [np.concatenate([s.states, s.actions], axis=1) for s in segments]
    )
    return joined, length


def _check_finite_per_segment(values: np.ndarray, what: str) -> None:
    bad = np.flatnonzero(~np.isfinite(values))
    if bad.size:
        raise ValueError(f"non-finite {what} for batch element {int(bad[0])}")


def rating_loss_param_grad(net: RewardNet, segments: list[Segment], classes: np.ndarray,
                           normalizer: ReturnNormalizer, boundaries: ClassBoundaries,
                           sharpness: float, gamma: float) -> tuple[float, Grads]:
    """Rating cross-entropy over a segment batch and its parameter gradient."""
    inputs, length = _stack_segments(segments)
    weights = discount_weights(length, gamma)
    out, acts = net.net.forward_cached(inputs)
    rewards = out[:, 0].reshape(len(segments), length)
    returns = rewards @ weights
    _check_finite_per_segment(returns, "predicted return")
    norm, norm_grad = normalizer.normalize_with_grad_mask(returns)
    loss, d_norm = rating_loss_grad(norm, classes, boundaries, sharpness)
    d_return = d_norm * norm_grad
    grad_out = (d_return[:, None] * weights[None, :]).reshape(-1, 1)
    return loss, net.net.backward(acts, grad_out)


def preference_loss_param_grad(net: RewardNet, firsts: list[Segment], seconds: list[Segment],
                               first_preferred: np.ndarray, gamma: float) -> tuple[float, Grads]:
    """Bradley-Terry cross-entropy over a pair batch and its parameter gradient."""
    if len(firsts) != len(seconds):
        raise ValueError("pair batch sides must align")
    inputs, length = _stack_segments([*firsts, *seconds])
    weights = discount_weights(length, gamma)
    out, acts = net.net.forward_cached(inputs)
    returns = (out[:, 0].reshape(-1, length)) @ weights
    _check_finite_per_segment(returns, "predicted return")
    n = len(firsts)
    loss, grad_a, grad_b = preference_loss_grad(returns[:n], returns[n:], first_preferred)
    d_return = np.concatenate([grad_a, grad_b])
    grad_out = (d_return[:, None] * weights[None, :]).reshape(-1, 1)
    return loss, net.net.backward(acts, grad_out)


@dataclass
class RewardTrainConfig:
    lr: float = 3e-4
    epochs_per_update: int = 50
    batch_size: int = 64
    gamma: float = 1.0
    sharpness: float = 30.0


@dataclass
class RoundStats:
    mean_loss: float
    boundaries: list[float] | None = None
    r_min: float | None = None
    r_max: float | None = None
    batches: int = 0


@dataclass
class RatingRewardTrainer:
    """Per-round optimizer for one reward net against the rated dataset."""

    net: RewardNet
    config: RewardTrainConfig
    seed: int
    _adam: Adam = field(init=False)
    _rng: np.random.Generator = field(init=False)

    def __post_init__(self):
        self._adam = Adam(lr=self.config.lr)
        self._rng = np.random.default_rng(self.seed)

    def fit_round(self, dataset: RatedDataset) -> RoundStats:
        if len(dataset) == 0:
            raise ValueError("cannot fit a reward model to an empty dataset")
        cfg = self.config
        segments = dataset.segments()
        classes = dataset.observed_classes()

        # freeze normalization and boundaries for the whole round
        returns = self.net.segment_returns(segments, cfg.gamma)
        normalizer = ReturnNormalizer.from_returns(returns)
        sorted_norm = np.sort(normalizer.normalize(returns))
        boundaries = fit_boundaries(sorted_norm, dataset.class_counts())

        total_loss = 0.0
        total_items = 0
        batches = 0
        for _ in range(cfg.epochs_per_update):
            order = self._rng.permutation(len(segments))
            for lo in range(0, len(order), cfg.batch_size):
                idx = order[lo : lo + cfg.batch_size]
                loss, grads = rating_loss_param_grad(
                    self.net, [segments[i] for i in idx], classes[idx],
                    normalizer, boundaries, cfg.sharpness, cfg.gamma,
                )
                self._adam.step(self.net.net, grads)
                total_loss += loss
                total_items += idx.size
                batches += 1
        return RoundStats(
            mean_loss=total_loss / max(total_items, 1),
            boundaries=list(boundaries.values),
            r_min=normalizer.r_min,
            r_max=normalizer.r_max,
            batches=batches,
        )


@dataclass
class PreferenceRewardTrainer:
    """Per-round optimizer for one reward net against the preference dataset."""

    net: RewardNet
    config: RewardTrainConfig
    seed: int
    _adam: Adam = field(init=False)
    _rng: np.random.Generator = field(init=False)

    def __post_init__(self):
        self._adam = Adam(lr=self.config.lr)
        self._rng = np.random.default_rng(self.seed)

    def fit_round(self, dataset: PreferenceDataset) -> RoundStats:
        if len(dataset) == 0:
            raise ValueError("cannot fit a reward model to an empty dataset")
        cfg = self.config
        firsts = [first for first, _, _ in dataset.entries]
        seconds = [second for _, second, _ in dataset.entries]
        first_preferred = np.asarray(
            [label.preferred == "first" for _, _, label in dataset.entries], dtype=np.float64
        )
        total_loss = 0.0
        total_items = 0
        batches = 0
        for _ in range(cfg.epochs_per_update):
            order = self._rng.permutation(len(firsts))
            for lo in range(0, len(order), cfg.batch_size):
                idx = order[lo : lo + cfg.batch_size]
                loss, grads = preference_loss_param_grad(
                    self.net, [firsts[i] for i in idx], [seconds[i] for i in idx],
                    first_preferred[idx], cfg.gamma,
                )
                self._adam.step(self.net.net, grads)
                total_loss += loss
                total_items += idx.size
                batches += 1
        return RoundStats(mean_loss=total_loss / max(total_items, 1), batches=batches)
