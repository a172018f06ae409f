"""Learned reward predictor over (state, action) pairs, and ensembles of it.

A reward net maps the concatenated state-action vector to a scalar through
a small tanh MLP. Segment returns are discounted sums of per-step
predictions. Ensembles exist for disagreement-based query selection; their
mean prediction is what policy training consumes.
"""

from __future__ import annotations

import numpy as np

from .mlp import MLP, load_params, save_params
from .segments import Segment


def discount_weights(length: int, gamma: float) -> np.ndarray:
    if not (0.0 < gamma <= 1.0):
        raise ValueError(f"discount must be in (0, 1], got {gamma}")
    if gamma == 1.0:
        return np.ones(length)
    return gamma ** np.arange(length, dtype=np.float64)


class RewardNet:
    """Scalar reward head r(s, a); default body is 2 hidden layers of 64 tanh units."""

    def __init__(self, state_dim: int, action_dim: int, hidden: tuple[int, ...] = (64, 64), seed: int = 0):
        self.state_dim = int(state_dim)
        self.action_dim = int(action_dim)
        self.net = MLP(self.state_dim + self.action_dim, hidden, 1, seed)

    def copy(self) -> "RewardNet":
        dup = RewardNet.__new__(RewardNet)
        dup.state_dim, dup.action_dim = self.state_dim, self.action_dim
        dup.net = self.net.copy()
        return dup

    def _join(self, states, actions) -> np.ndarray:
        states = np.atleast_2d(np.asarray(states, dtype=np.float64))
        actions = np.atleast_2d(np.asarray(actions, dtype=np.float64))
        if states.shape[1] != self.state_dim or actions.shape[1] != self.action_dim:
            raise ValueError(
                f"expected dims ({self.state_dim}, {self.action_dim}), "
                f"got ({states.shape[1]}, {actions.shape[1]})"
            )
        if len(states) != len(actions):
            raise ValueError("states and actions must pair up")
        return np.concatenate([states, actions], axis=1)

    def reward(self, state, action) -> float:
        """Predicted reward of a single state-action pair."""
        return float(self.net.forward(self._join(state, action))[0, 0])

    def reward_batch(self, states, actions) -> np.ndarray:
        return self.net.forward(self._join(states, actions))[:, 0]

    def segment_return(self, segment: Segment, gamma: float = 1.0) -> float:
        """Discounted sum of per-step predicted rewards over the segment."""
        rewards = self.reward_batch(segment.states, segment.actions)
        return float(rewards @ discount_weights(len(segment), gamma))

    def segment_returns(self, segments: list[Segment], gamma: float = 1.0) -> np.ndarray:
        """segment_return over a batch, computed with one forward pass.

        Requires uniform segment length (the dataset invariant).
        """
        if not segments:
            return np.zeros(0)
        length = len(segments[0])
        if any(len(s) != length for s in segments):
            raise ValueError("batched returns need uniform segment length")
        states = np.concatenate([s.states for s in segments])
        actions = np.concatenate([s.actions for s in segments])
        rewards = self.reward_batch(states, actions).reshape(len(segments), length)
        return rewards @ discount_weights(length, gamma)

    def save(self, path) -> None:
        save_params(path, self.net)

    def load(self, path) -> None:
        load_params(path, self.net)


class RewardEnsemble:
    """Independent reward nets sharing an architecture, distinct seeds."""

    def __init__(self, state_dim: int, action_dim: int, size: int = 3,
                 hidden: tuple[int, ...] = (64, 64), seed: int = 0):
        if size < 1:
            raise ValueError("ensemble needs at least one member")
        seeds = np.random.SeedSequence(seed).generate_state(size)
        self.members = [
            RewardNet(state_dim, action_dim, hidden, seed=int(s)) for s in seeds
        ]

    def __len__(self) -> int:
        return len(self.members)

    def ensemble_returns(self, segment: Segment, gamma: float = 1.0) -> np.ndarray:
        """Per-member predicted return of one segment."""
        return np.asarray([m.segment_return(segment, gamma) for m in self.members])

    def member_returns(self, segments: list[Segment], gamma: float = 1.0) -> np.ndarray:
        """(n_members, n_segments) matrix of predicted returns."""
        return np.stack([m.segment_returns(segments, gamma) for m in self.members])

    def mean_reward_batch(self, states, actions) -> np.ndarray:
        """Ensemble-mean per-step reward; the snapshot policy training reads."""
        total = self.members[0].reward_batch(states, actions)
        for member in self.members[1:]:
            total = total + member.reward_batch(states, actions)
        return total / len(self.members)

    def copy(self) -> "RewardEnsemble":
        dup = RewardEnsemble.__new__(RewardEnsemble)
        dup.members = [m.copy() for m in self.members]
        return dup
