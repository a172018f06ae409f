"""Pure-python rollout kernel, the fallback twin of the compiled extension.

Both backends implement the same fused loop: observe, run the policy mean
net on the single current observation, add exploration noise, clip to the
action bounds, advance the environment, record the reward. Keeping the two
in lockstep is enforced by tests that compare them step for step.
"""

from __future__ import annotations

import math

import numpy as np

LINE_WALKER = 0
POINT_MAZE = 1

BACKEND_NAME = "python"


def _observe(kind: int, params: np.ndarray, state: np.ndarray) -> np.ndarray:
    if kind == LINE_WALKER:
        track_half, vel_scale = params[4], params[5]
        return np.array([state[0] / track_half, state[1] / vel_scale])
    return state.copy()


def _advance(kind: int, params: np.ndarray, state: np.ndarray, action: np.ndarray) -> float:
    """Mutates state in place, returns the ground-truth reward."""
    if kind == LINE_WALKER:
        dt, drag, gain, v_max, track_half = params[0], params[1], params[2], params[3], params[4]
        state[1] += (gain * action[0] - drag * state[1]) * dt
        x = state[0] + state[1] * dt
        # wrap onto the circular track [-track_half, track_half); explicit
        # fmod-plus-correction so the compiled kernel can match bit for bit
        wrapped = math.fmod(x + track_half, 2.0 * track_half)
        if wrapped < 0.0:
            wrapped += 2.0 * track_half
        state[0] = wrapped - track_half
        return float(min(max(state[1], -v_max), v_max))
    dt, speed = params[0], params[1]
    state[0] = min(max(state[0] + speed * action[0] * dt, -1.0), 1.0)
    state[1] = min(max(state[1] + speed * action[1] * dt, -1.0), 1.0)
    return -float(np.hypot(state[0] - state[2], state[1] - state[3]))


def _policy_mean(weights: list[np.ndarray], biases: list[np.ndarray], obs: np.ndarray) -> np.ndarray:
    h = obs
    last = len(weights) - 1
    for i, (w, b) in enumerate(zip(weights, biases)):
        h = h @ w + b
        if i != last:
            h = np.tanh(h)
    return h


def rollout_episode(kind, env_params, init_state, weights, biases, log_std,
                    noise, act_low, act_high):
    """Run one fixed-length episode under a Gaussian policy.

    noise holds the pre-drawn standard normals, one row per step; a zero
    array gives the deterministic (mean-action) rollout. Returns
    (observations incl. the post-episode one, raw pre-clip actions,
    ground-truth rewards).
    """
    env_params = np.asarray(env_params, dtype=np.float64)
    state = np.array(init_state, dtype=np.float64)
    noise = np.asarray(noise, dtype=np.float64)
    steps, act_dim = noise.shape
    std = np.exp(np.asarray(log_std, dtype=np.float64))
    obs_dim = _observe(kind, env_params, state).shape[0]

    obs_buf = np.empty((steps + 1, obs_dim))
    act_buf = np.empty((steps, act_dim))
    rew_buf = np.empty(steps)
    for t in range(steps):
        obs = _observe(kind, env_params, state)
        obs_buf[t] = obs
        raw = _policy_mean(weights, biases, obs) + std * noise[t]
        act_buf[t] = raw
        exec_action = np.clip(raw, act_low, act_high)
        rew_buf[t] = _advance(kind, env_params, state, exec_action)
    obs_buf[steps] = _observe(kind, env_params, state)
    return obs_buf, act_buf, rew_buf
