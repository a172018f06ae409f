"""Rollout kernel benchmark: compiled extension vs pure-python twin.

The fused per-step loop (policy forward + env dynamics) is the hottest
code in experiment runs; this measures raw episode throughput for both
backends on both environments.

Run:  python benchmarks/bench_rollout.py [--steps 100000]
"""

import argparse
import time

import numpy as np

from ratecraft._kernels import compiled, reference
from ratecraft.envs import LineWalker, PointMaze2D
from ratecraft.mlp import MLP


def bench(rollout, env, episode_len: int, total_steps: int, seed: int = 0) -> float:
    net = MLP(env.spec.state_dim, (32, 32), env.spec.action_dim, seed=seed)
    log_std = np.full(env.spec.action_dim, -0.5)
    low = np.full(env.spec.action_dim, env.spec.action_low)
    high = np.full(env.spec.action_dim, env.spec.action_high)
    rng = np.random.default_rng(seed)
    episodes = max(total_steps // episode_len, 1)
    noise = rng.normal(size=(episode_len, env.spec.action_dim))

    env.reset(seed=seed)
    args = (env.kernel_kind, env.kernel_params(), env.internal_state(),
            net.weights, net.biases, log_std, noise, low, high)
    rollout(*args)  # warm-up

    start = time.perf_counter()
    for _ in range(episodes):
        rollout(*args)
    elapsed = time.perf_counter() - start
    return episodes * episode_len / elapsed


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--steps", type=int, default=100_000, help="env steps per measurement")
    parser.add_argument("--episode-len", type=int, default=500)
    args = parser.parse_args()

    backends = [("python", reference.rollout_episode)]
    if compiled is not None:
        backends.append(("compiled", compiled.rollout_episode))
    else:
        print("note: compiled extension not built; benchmarking python only")

    print(f"{'env':<12} {'backend':<10} {'steps/s':>12}")
    for env_ctor in (LineWalker, PointMaze2D):
        rates = {}
        for name, rollout in backends:
            env = env_ctor(episode_len=args.episode_len)
            rates[name] = bench(rollout, env, args.episode_len, args.steps)
            print(f"{env.spec.name:<12} {name:<10} {rates[name]:>12,.0f}")
        if len(rates) == 2:
            print(f"{'':<12} {'speedup':<10} {rates['compiled'] / rates['python']:>11.1f}x")


if __name__ == "__main__":
    main()
