"""Advantage actor-critic with GAE, trained against a supplied reward
function (a learned-reward snapshot in the full loop, or a ground-truth
formula for the oracle yardstick).

The learner never reads environment rewards for training: reward_fn is the
only reward source. Rollout buffers do carry the hidden env rewards, but
those flow only into evaluation curves.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .mlp import MLP, Adam, AdamVector
from .segments import Segment

LOG_2PI = float(np.log(2.0 * np.pi))


@dataclass
class PolicyOptConfig:
    hidden: tuple[int, ...] = (32, 32)
    policy_lr: float = 3e-3
    value_lr: float = 1e-2
    gamma: float = 0.99
    gae_lambda: float = 0.95
    entropy_coef: float = 1e-3
    log_std_init: float = -0.5
    # exploration floor: rollouts must stay diverse enough that queried
    # segments keep carrying ordering information for reward learning
    log_std_min: float = -1.5
    log_std_max: float = 0.5
    episodes_per_update: int = 1
    normalize_advantages: bool = True
    # normalization never amplifies: dividing by spreads below this floor
    # would turn flat-reward noise into full-strength gradients
    adv_norm_floor: float = 1.0


class GaussianPolicy:
    """Diagonal Gaussian over actions; state-dependent mean, global log-std."""

    def __init__(self, obs_dim: int, act_dim: int, hidden: tuple[int, ...] = (32, 32),
                 seed: int = 0, log_std_init: float = -0.5):
        self.obs_dim, self.act_dim = int(obs_dim), int(act_dim)
        self.mean_net = MLP(obs_dim, hidden, act_dim, seed=seed)
        self.log_std = np.full(act_dim, float(log_std_init))

    def mean_actions(self, states: np.ndarray) -> np.ndarray:
        return self.mean_net.forward(np.atleast_2d(states))

    def act(self, state: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        mean = self.mean_actions(state[None, :])[0]
        return mean + np.exp(self.log_std) * rng.normal(size=self.act_dim)

    def copy(self) -> "GaussianPolicy":
        dup = GaussianPolicy.__new__(GaussianPolicy)
        dup.obs_dim, dup.act_dim = self.obs_dim, self.act_dim
        dup.mean_net = self.mean_net.copy()
        dup.log_std = self.log_std.copy()
        return dup

    def save(self, path) -> None:
        header = {"layer_sizes": self.mean_net.layer_sizes, "log_std_dim": self.act_dim}
        with open(path, "wb") as fh:
            fh.write(json.dumps(header).encode() + b"\n")
            fh.write(self.mean_net.get_flat().astype("<f8").tobytes())
            fh.write(self.log_std.astype("<f8").tobytes())

    def load(self, path) -> None:
        with open(path, "rb") as fh:
            header = json.loads(fh.readline().decode())
            if header["layer_sizes"] != self.mean_net.layer_sizes:
                raise ValueError("checkpoint does not match this policy's shape")
            flat = np.frombuffer(fh.read(), dtype="<f8")
        n_mean = self.mean_net.get_flat().size
        self.mean_net.set_flat(flat[:n_mean].astype(np.float64))
        self.log_std[...] = flat[n_mean:]


def make_value_net(obs_dim: int, hidden: tuple[int, ...], seed: int) -> MLP:
    """State-value net with a zero output layer, so an all-zero reward
    stream yields exactly zero advantages and no parameter drift."""
    net = MLP(obs_dim, hidden, 1, seed=seed)
    net.weights[-1][...] = 0.0
    net.biases[-1][...] = 0.0
    return net


def generalized_advantages(rewards: np.ndarray, values: np.ndarray, gamma: float,
                           lam: float) -> np.ndarray:
    """GAE over one episode; values has one extra entry for the bootstrap."""
    steps = rewards.shape[0]
    adv = np.empty(steps)
    running = 0.0
    for t in range(steps - 1, -1, -1):
        delta = rewards[t] + gamma * values[t + 1] - values[t]
        running = delta + gamma * lam * running
        adv[t] = running
    return adv


@dataclass
class EpisodeBuffer:
    observations: np.ndarray  # (T+1, obs_dim), includes bootstrap obs
    raw_actions: np.ndarray  # (T, act_dim), pre-clip samples
    exec_actions: np.ndarray  # (T, act_dim), what the env executed
    env_rewards: np.ndarray  # (T,), hidden ground truth: evaluation only


class PolicyLearner:
    """One environment, one policy, synchronous updates every few episodes."""

    def __init__(self, env, config: PolicyOptConfig, seed: int):
        self.env = env
        self.config = config
        spec = env.spec
        seeds = np.random.SeedSequence(seed).spawn(4)
        self.policy = GaussianPolicy(
            spec.state_dim, spec.action_dim, config.hidden,
            seed=int(seeds[0].generate_state(1)[0]), log_std_init=config.log_std_init,
        )
        self.value_net = make_value_net(spec.state_dim, config.hidden,
                                        seed=int(seeds[1].generate_state(1)[0]))
        self._noise_rng = np.random.default_rng(seeds[2])
        self._reset_rng = np.random.default_rng(seeds[3])
        self._mean_opt = Adam(lr=config.policy_lr)
        self._log_std_opt = AdamVector(lr=config.policy_lr)
        self._value_opt = Adam(lr=config.value_lr)
        self._act_low = np.full(spec.action_dim, spec.action_low)
        self._act_high = np.full(spec.action_dim, spec.action_high)
        self.steps_done = 0
        self.skipped_updates = 0

    # -- rollout ------------------------------------------------------------

    def collect_episode(self) -> EpisodeBuffer:
        spec = self.env.spec
        steps = spec.episode_len
        noise = self._noise_rng.normal(size=(steps, spec.action_dim))
        reset_seed = int(self._reset_rng.integers(2**31))
        if self.env.kernel_kind is not None:
            self.env.reset(seed=reset_seed)
            obs, raw, rewards = _kernels.rollout_episode(
                self.env.kernel_kind, self.env.kernel_params(), self.env.internal_state(),
                self.policy.mean_net.weights, self.policy.mean_net.biases,
                self.policy.log_std, noise, self._act_low, self._act_high,
            )
        else:
            obs, raw, rewards = self._python_rollout(noise, reset_seed)
        self.steps_done += steps
        return EpisodeBuffer(
            observations=obs,
            raw_actions=raw,
            exec_actions=np.clip(raw, self._act_low, self._act_high),
            env_rewards=rewards,
        )

    def _python_rollout(self, noise: np.ndarray, reset_seed: int):
        state = self.env.reset(seed=reset_seed)
        steps = noise.shape[0]
        obs = np.empty((steps + 1, self.env.spec.state_dim))
        raw = np.empty_like(noise)
        rewards = np.empty(steps)
        std = np.exp(self.policy.log_std)
        for t in range(steps):
            obs[t] = state
            raw[t] = self.policy.mean_actions(state[None, :])[0] + std * noise[t]
            transition = self.env.step(np.clip(raw[t], self._act_low, self._act_high))
            rewards[t] = transition.env_reward
            state = transition.next_state
        obs[steps] = state
        return obs, raw, rewards

    # -- update -------------------------------------------------------------

    def update(self, episodes: list[EpisodeBuffer], reward_fn) -> dict:
        cfg = self.config
        all_obs, all_raw, advantages, targets = [], [], [], []
        learned_sums = []
        for ep in episodes:
            steps = ep.raw_actions.shape[0]
            learned = np.asarray(reward_fn(ep.observations[:steps], ep.exec_actions), dtype=np.float64)
            values = self.value_net.forward(ep.observations)[:, 0]
            adv = generalized_advantages(learned, values, cfg.gamma, cfg.gae_lambda)
            all_obs.append(ep.observations[:steps])
            all_raw.append(ep.raw_actions)
            advantages.append(adv)
            targets.append(adv + values[:steps])
            learned_sums.append(float(learned.sum()))

        obs = np.concatenate(all_obs)
        raw = np.concatenate(all_raw)
        adv = np.concatenate(advantages)
        target = np.concatenate(targets)
        stats = {
            "steps": self.steps_done,
            "mean_learned_return": float(np.mean(learned_sums)),
            "mean_gt_return": float(np.mean([ep.env_rewards.sum() for ep in episodes])),
            "skipped": False,
        }
        if not np.isfinite(adv).all():
            self.skipped_updates += 1
            stats["skipped"] = True
            return stats

        if cfg.normalize_advantages:
            adv = (adv - adv.mean()) / max(float(adv.std()), cfg.adv_norm_floor)

        n = obs.shape[0]
        std = np.exp(self.policy.log_std)
        mean, acts = self.policy.mean_net.forward_cached(obs)
        z = (raw - mean) / std
        # maximize E[adv * log pi] + entropy bonus
        mean_grad_out = -(adv[:, None] * z / std) / n
        log_std_grad = -(adv[:, None] * (z**2 - 1.0)).sum(axis=0) / n - cfg.entropy_coef
        value_out, value_acts = self.value_net.forward_cached(obs)
        value_grad_out = 2.0 * (value_out - target[:, None]) / n

        self._mean_opt.step(self.policy.mean_net, self.policy.mean_net.backward(acts, mean_grad_out))
        self._log_std_opt.step(self.policy.log_std, log_std_grad)
        np.clip(self.policy.log_std, cfg.log_std_min, cfg.log_std_max, out=self.policy.log_std)
        self._value_opt.step(self.value_net, self.value_net.backward(value_acts, value_grad_out))
        stats["value_loss"] = float(np.mean((value_out[:, 0] - target) ** 2))
        return stats

    def run_steps(self, step_budget: int, reward_fn, episode_hook=None,
                  update: bool = True) -> list[dict]:
        """Collect and learn for at least step_budget env steps (rounded up
        to whole update batches); returns per-update stats. With
        update=False only collection happens (seed/warmup phases)."""
        cfg = self.config
        stats_rows = []
        target = self.steps_done + step_budget
        while self.steps_done < target:
            episodes = [self.collect_episode() for _ in range(cfg.episodes_per_update)]
            if episode_hook is not None:
                for ep in episodes:
                    episode_hook(ep)
            if update:
                stats_rows.append(self.update(episodes, reward_fn))
        return stats_rows


def train_policy(env, reward_fn, total_steps: int, config: PolicyOptConfig | None = None,
                 seed: int = 0) -> tuple[GaussianPolicy, list[dict]]:
    """Train a fresh policy against reward_fn; returns it with the
    per-update curve of mean learned-reward and ground-truth returns."""
    learner = PolicyLearner(env, config or PolicyOptConfig(), seed)
    curve = learner.run_steps(total_steps, reward_fn)
    return learner.policy, curve


def evaluate_policy(env, policy: GaussianPolicy, episodes: int, seed: int) -> tuple[float, float]:
    """Mean and std of the hidden ground-truth episode return under the
    deterministic (mean-action) policy. Scoring only; never training."""
    if episodes < 1:
        raise ValueError("need at least one evaluation episode")
    spec = env.spec
    reset_rng = np.random.default_rng(np.random.SeedSequence(seed))
    zero_noise = np.zeros((spec.episode_len, spec.action_dim))
    low = np.full(spec.action_dim, spec.action_low)
    high = np.full(spec.action_dim, spec.action_high)
    scores = []
    for _ in range(episodes):
        reset_seed = int(reset_rng.integers(2**31))
        if env.kernel_kind is not None:
            env.reset(seed=reset_seed)
            _, _, rewards = _kernels.rollout_episode(
                env.kernel_kind, env.kernel_params(), env.internal_state(),
                policy.mean_net.weights, policy.mean_net.biases,
                policy.log_std, zero_noise, low, high,
            )
            scores.append(float(rewards.sum()))
        else:
            state = env.reset(seed=reset_seed)
            total = 0.0
            done = False
            while not done:
                action = policy.mean_actions(state[None, :])[0]
                transition = env.step(np.clip(action, low, high))
                total += transition.env_reward
                state = transition.next_state
                done = transition.done
            scores.append(total)
    return float(np.mean(scores)), float(np.std(scores))


def episode_to_segments(buffer: EpisodeBuffer, segment_len: int, gamma: float,
                        next_id: int) -> list[Segment]:
    """Slice an episode buffer into contiguous rating-ready segments."""
    steps = buffer.raw_actions.shape[0]
    weights = gamma ** np.arange(segment_len, dtype=np.float64)
    segments = []
    for lo in range(0, steps - segment_len + 1, segment_len):
        window = slice(lo, lo + segment_len)
        segments.append(
            Segment(
                id=next_id + len(segments),
                states=buffer.observations[window].copy(),
                actions=buffer.exec_actions[window].copy(),
                gt_return=float(buffer.env_rewards[window] @ weights),
            )
        )
    return segments
