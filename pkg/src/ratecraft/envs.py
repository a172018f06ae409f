"""Desk-scale control environments with known, bounded ground-truth rewards.

LineWalker is a velocity task (drive right as fast as possible on a
circular track); PointMaze2D is a goal-reaching task (negative distance to
a per-episode goal). Both expose the same episodic interface plus the
metadata the fused rollout kernels need. Ground-truth rewards are hidden
from learners: only teachers and evaluation may read them.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .reward import discount_weights
from .segments import Segment


@dataclass(frozen=True)
class EnvSpec:
    name: str
    state_dim: int
    action_dim: int
    action_low: float
    action_high: float
    reward_low: float
    reward_high: float
    episode_len: int


@dataclass(frozen=True)
class Transition:
    state: np.ndarray
    action: np.ndarray
    next_state: np.ndarray
    env_reward: float  # ground truth, for teachers and evaluation only
    done: bool


class _EpisodicEnv:
    """reset/step plumbing shared by both environments."""

    spec: EnvSpec
    kernel_kind: int | None = None

    def __init__(self):
        self._t = 0
        self._done = True
        self.clamp_count = 0  # out-of-bounds actions silently clamped

    def reset(self, seed: int) -> np.ndarray:
        self._t = 0
        self._done = False
        return self._reset_state(np.random.default_rng(seed))

    def step(self, action) -> Transition:
        if self._done:
            raise RuntimeError("step() after the episode ended; call reset()")
        action = np.asarray(action, dtype=np.float64).reshape(self.spec.action_dim)
        clipped = np.clip(action, self.spec.action_low, self.spec.action_high)
        if not np.array_equal(clipped, action):
            self.clamp_count += 1
        before = self._observe()
        reward = self._advance(clipped)
        self._t += 1
        self._done = self._t >= self.spec.episode_len
        return Transition(before, clipped, self._observe(), reward, self._done)

    # subclass hooks -------------------------------------------------------

    def _reset_state(self, rng: np.random.Generator) -> np.ndarray:
        raise NotImplementedError

    def _observe(self) -> np.ndarray:
        raise NotImplementedError

    def _advance(self, action: np.ndarray) -> float:
        raise NotImplementedError

    def kernel_params(self) -> np.ndarray:
        raise NotImplementedError

    def internal_state(self) -> np.ndarray:
        raise NotImplementedError


class LineWalker(_EpisodicEnv):
    """Point mass on a circular 1-d track; reward is (clipped) velocity.

    State is (position, velocity) scaled to roughly [-1, 1]; the scalar
    action is thrust. Drag bounds the attainable velocity so the declared
    per-step reward bounds are tight.
    """

    kernel_kind = _kernels.LINE_WALKER

    def __init__(self, dt: float = 0.1, drag: float = 0.1, thrust_gain: float = 1.0,
                 v_max: float = 5.0, track_half: float = 10.0, vel_scale: float = 10.0,
                 episode_len: int = 500):
        super().__init__()
        self.dt, self.drag, self.thrust_gain = dt, drag, thrust_gain
        self.v_max, self.track_half, self.vel_scale = v_max, track_half, vel_scale
        self.spec = EnvSpec(
            name="line-walker",
            state_dim=2,
            action_dim=1,
            action_low=-1.0,
            action_high=1.0,
            reward_low=-v_max,
            reward_high=v_max,
            episode_len=episode_len,
        )
        self._x = 0.0
        self._v = 0.0

    def _reset_state(self, rng: np.random.Generator) -> np.ndarray:
        # start at rest; episode variety comes from the policy
        self._x = 0.0
        self._v = 0.0
        return self._observe()

    def _observe(self) -> np.ndarray:
        return np.array([self._x / self.track_half, self._v / self.vel_scale])

    def _advance(self, action: np.ndarray) -> float:
        self._v += (self.thrust_gain * action[0] - self.drag * self._v) * self.dt
        wrapped = math.fmod(self._x + self._v * self.dt + self.track_half, 2.0 * self.track_half)
        if wrapped < 0.0:
            wrapped += 2.0 * self.track_half
        self._x = wrapped - self.track_half
        return self._reward()

    def _reward(self) -> float:
        return float(min(max(self._v, -self.v_max), self.v_max))

    def kernel_params(self) -> np.ndarray:
        return np.array([self.dt, self.drag, self.thrust_gain, self.v_max,
                         self.track_half, self.vel_scale])

    def internal_state(self) -> np.ndarray:
        return np.array([self._x, self._v])

    def reward_from_obs_actions(self, states, actions) -> np.ndarray:
        """Ground-truth reward as a pure function of (observation, action);
        exactly reproduces the rewards step() emits."""
        states = np.atleast_2d(np.asarray(states, dtype=np.float64))
        actions = np.atleast_2d(np.asarray(actions, dtype=np.float64))
        v = states[:, 1] * self.vel_scale
        v_next = v + (self.thrust_gain * actions[:, 0] - self.drag * v) * self.dt
        return np.clip(v_next, -self.v_max, self.v_max)


class PointMaze2D(_EpisodicEnv):
    """Point agent in the [-1, 1]^2 arena; reward is -distance to the goal.

    State is (x, y, goal_x, goal_y); agent start and goal are drawn fresh
    each reset from the episode seed.
    """

    kernel_kind = _kernels.POINT_MAZE

    def __init__(self, dt: float = 0.1, speed: float = 1.0, episode_len: int = 500):
        super().__init__()
        self.dt, self.speed = dt, speed
        diameter = 2.0 * math.sqrt(2.0)
        self.spec = EnvSpec(
            name="point-maze",
            state_dim=4,
            action_dim=2,
            action_low=-1.0,
            action_high=1.0,
            reward_low=-diameter,
            reward_high=0.0,
            episode_len=episode_len,
        )
        self._state = np.zeros(4)

    def _reset_state(self, rng: np.random.Generator) -> np.ndarray:
        self._state = rng.uniform(-1.0, 1.0, size=4)
        return self._observe()

    def _observe(self) -> np.ndarray:
        return self._state.copy()

    def _advance(self, action: np.ndarray) -> float:
        s = self._state
        s[0] = min(max(s[0] + self.speed * action[0] * self.dt, -1.0), 1.0)
        s[1] = min(max(s[1] + self.speed * action[1] * self.dt, -1.0), 1.0)
        return -float(np.hypot(s[0] - s[2], s[1] - s[3]))

    def kernel_params(self) -> np.ndarray:
        return np.array([self.dt, self.speed])

    def internal_state(self) -> np.ndarray:
        return self._state.copy()

    def reward_from_obs_actions(self, states, actions) -> np.ndarray:
        """Ground-truth reward as a pure function of (observation, action)."""
        states = np.atleast_2d(np.asarray(states, dtype=np.float64))
        actions = np.atleast_2d(np.asarray(actions, dtype=np.float64))
        px = np.clip(states[:, 0] + self.speed * actions[:, 0] * self.dt, -1.0, 1.0)
        py = np.clip(states[:, 1] + self.speed * actions[:, 1] * self.dt, -1.0, 1.0)
        return -np.hypot(px - states[:, 2], py - states[:, 3])


ENV_REGISTRY = {
    "line-walker": LineWalker,
    "point-maze": PointMaze2D,
}


def make_env(name: str, **overrides) -> _EpisodicEnv:
    if name not in ENV_REGISTRY:
        raise ValueError(f"unknown env {name!r}; choose from {sorted(ENV_REGISTRY)}")
    return ENV_REGISTRY[name](**overrides)


def collect_segments(env: _EpisodicEnv, policy_fn, count: int, segment_len: int,
                     gamma: float, seed: int, start_id: int = 0) -> list[Segment]:
    """Roll the policy and slice episodes into contiguous fixed-length
    windows, recording each window's discounted ground-truth return.

    policy_fn(state, rng) -> action. Ids are assigned sequentially from
    start_id so query tie-breaking stays deterministic.
    """
    if segment_len > env.spec.episode_len:
        raise ValueError("segment length exceeds the episode length")
    weights = discount_weights(segment_len, gamma)
    action_seed, reset_seed = np.random.SeedSequence(seed).spawn(2)
    rng = np.random.default_rng(action_seed)
    windows_per_episode = env.spec.episode_len // segment_len
    episodes_needed = -(-count // windows_per_episode)
    reset_seeds = reset_seed.generate_state(max(episodes_needed, 1))
    segments: list[Segment] = []
    episode = 0
    while len(segments) < count:
        state = env.reset(seed=int(reset_seeds[episode % len(reset_seeds)]))
        states, actions, rewards = [], [], []
        done = False
        while not done:
            action = policy_fn(state, rng)
            transition = env.step(action)
            states.append(transition.state)
            actions.append(transition.action)
            rewards.append(transition.env_reward)
            state = transition.next_state
            done = transition.done
        episode += 1
        for lo in range(0, len(states) - segment_len + 1, segment_len):
            if len(segments) >= count:
                break
            window = slice(lo, lo + segment_len)
            gt = float(np.asarray(rewards[window]) @ weights)
            segments.append(
                Segment(
                    id=start_id + len(segments),
                    states=np.asarray(states[window]),
                    actions=np.asarray(actions[window]),
                    gt_return=gt,
                )
            )
    return segments


def render_trace(env: _EpisodicEnv, segment: Segment) -> list[dict]:
    """Per-step drawable primitives for UI playback, one frame per step."""
    frames = []
    for t in range(len(segment)):
        state = segment.states[t]
        if isinstance(env, LineWalker):
            frames.append({"t": t, "pos": [float(state[0])], "vel": float(state[1])})
        elif isinstance(env, PointMaze2D):
            frames.append({
                "t": t,
                "pos": [float(state[0]), float(state[1])],
                "goal": [float(state[2]), float(state[3])],
            })
        else:
            frames.append({"t": t, "pos": [float(v) for v in state]})
    return frames
