"""Experiment orchestration: the full query/label/reward/policy loop for
both modalities, plus seeded sweeps with config-hash caching.

One run interleaves, synchronously and deterministically under a seed:
rollout collection, candidate-pool refresh, disagreement query selection,
labeling (synthetic teacher or the HTTP queue), per-round reward fitting,
and policy updates against the freshest ensemble snapshot.
"""

from __future__ import annotations

import csv
import dataclasses
import hashlib
import json
import time
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .envs import make_env, render_trace
from .policy import PolicyLearner, PolicyOptConfig, episode_to_segments, evaluate_policy
from .queries import (
    QueryTicket,
    TeacherAnswer,
    refresh_pool,
    select_preference_queries,
    select_rating_queries,
)
from .reward import RewardEnsemble
from .segments import (
    PreferenceDataset,
    PreferenceLabel,
    RatedDataset,
    RatingLabel,
    Segment,
    save_rated_dataset,
    serialize_preference_dataset,
)
from .teacher import SyntheticPreferenceTeacher, SyntheticRatingTeacher
from .training import PreferenceRewardTrainer, RatingRewardTrainer, RewardTrainConfig


@dataclass
class ExperimentConfig:
    env: str = "line-walker"
    modality: str = "rating"  # rating | preference
    n_classes: int = 4
    total_steps: int = 100_000
    query_budget: int = 200
    queries_per_round: int = 5
    reward_update_interval: int = 2_000
    segment_len: int = 50
    gamma_reward: float = 1.0
    gamma_policy: float = 0.99
    sharpness: float = 30.0
    ensemble_size: int = 3
    seed: int = 0
    teacher: str = "synthetic"  # synthetic | http-human
    out_dir: str | None = None
    pool_size: int = 100
    eval_interval: int = 5_000
    eval_episodes: int = 4
    reward_lr: float = 3e-4
    reward_epochs: int = 15
    reward_batch_size: int = 64
    replay_windows: int = 500
    answer_timeout_s: float = 30.0
    # seed phase: collect exploratory rollouts and fit the first few reward
    # rounds before any policy update, so the policy never chases an
    # untrained reward model
    policy_warmup_steps: int = 10_000
    env_overrides: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.modality not in ("rating", "preference"):
            raise ValueError(f"modality must be rating|preference, got {self.modality!r}")
        if self.modality == "rating" and self.n_classes < 2:
            raise ValueError("rating modality needs at least 2 classes")
        if self.query_budget > 0 and self.query_budget < self.queries_per_round:
            raise ValueError("query budget below queries-per-round")
        if self.teacher not in ("synthetic", "http-human"):
            raise ValueError(f"teacher must be synthetic|http-human, got {self.teacher!r}")
        if self.segment_len < 1:
            raise ValueError("segment length must be positive")

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def config_hash(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True).encode("utf-8")
        return hashlib.sha256(blob).hexdigest()[:16]

    @staticmethod
    def from_dict(data: dict) -> "ExperimentConfig":
        known = {f.name for f in dataclasses.fields(ExperimentConfig)}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return ExperimentConfig(**data)


class SyntheticTeacherQueue:
    """Answers every ticket immediately from ground-truth returns."""

    def __init__(self, config: ExperimentConfig, env_spec, seed: int):
        from .teacher import attainable_segment_return_range

        rating_seed, pref_seed = np.random.SeedSequence(seed).spawn(2)
        self.rating = SyntheticRatingTeacher(
            config.n_classes,
            attainable_segment_return_range(env_spec, config.segment_len, config.gamma_reward),
            seed=int(rating_seed.generate_state(1)[0]),
        )
        self.preference = SyntheticPreferenceTeacher(seed=int(pref_seed.generate_state(1)[0]))

    def collect_answers(self, tickets: list[QueryTicket], segments_by_id: dict[int, Segment],
                        frames_by_ticket: dict | None = None, timeout_s: float = 0.0) -> list[TeacherAnswer]:
        answers = []
        for ticket in tickets:
            if ticket.kind == "rating":
                seg = segments_by_id[ticket.segment_ids[0]]
                answers.append(TeacherAnswer(ticket.ticket_id, rating=self.rating.rate(seg)))
            else:
                first = segments_by_id[ticket.segment_ids[0]]
                second = segments_by_id[ticket.segment_ids[1]]
                answers.append(
                    TeacherAnswer(ticket.ticket_id, preferred=self.preference.prefer(first, second))
                )
        return answers


@dataclass
class RunRecord:
    config: dict
    config_hash: str
    curve: list[dict]
    rounds: list[dict]
    labels_total: int
    tickets_issued: int
    tickets_answered: int
    final_eval_mean: float
    final_eval_std: float
    wall_time_s: float

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


CURVE_COLUMNS = ("step", "mean_gt_return", "std_gt_return", "mean_learned_return")


def write_curve_csv(path, rows: list[dict]) -> None:
    """Curve rows with shortest-round-trip float text, so identical runs
    produce byte-identical files."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CURVE_COLUMNS)
        for row in rows:
            writer.writerow([repr(row[c]) if isinstance(row[c], float) else row[c] for c in CURVE_COLUMNS])


def run_experiment(config: ExperimentConfig, label_queue=None, stats_sink=None) -> RunRecord:
    """Execute one experiment; optionally wire a human label queue and a
    stats sink (the HTTP service) in place of the synthetic teacher."""
    started = time.time()
    env = make_env(config.env, **config.env_overrides)
    eval_env = make_env(config.env, **config.env_overrides)
    spec = env.spec

    seeds = np.random.SeedSequence(config.seed).spawn(6)
    policy_cfg = PolicyOptConfig(gamma=config.gamma_policy)
    learner = PolicyLearner(env, policy_cfg, seed=int(seeds[0].generate_state(1)[0]))
    ensemble = RewardEnsemble(
        spec.state_dim, spec.action_dim, size=config.ensemble_size,
        seed=int(seeds[1].generate_state(1)[0]),
    )
    pool_rng = np.random.default_rng(seeds[2])
    query_rng = np.random.default_rng(seeds[3])
    eval_seed_rng = np.random.default_rng(seeds[5])

    teacher_queue = label_queue
    if teacher_queue is None:
        if config.teacher != "synthetic":
            raise ValueError("http-human teacher requires serve_labeling to supply the queue")
        teacher_queue = SyntheticTeacherQueue(config, spec, seed=int(seeds[4].generate_state(1)[0]))

    reward_cfg = RewardTrainConfig(
        lr=config.reward_lr, epochs_per_update=config.reward_epochs,
        batch_size=config.reward_batch_size, gamma=config.gamma_reward,
        sharpness=config.sharpness,
    )
    trainer_seeds = np.random.SeedSequence(config.seed + 1).spawn(len(ensemble.members))
    if config.modality == "rating":
        dataset = RatedDataset(config.n_classes, config.segment_len)
        trainers = [
            RatingRewardTrainer(member, reward_cfg, seed=int(s.generate_state(1)[0]))
            for member, s in zip(ensemble.members, trainer_seeds)
        ]
    else:
        dataset = PreferenceDataset(config.segment_len)
        trainers = [
            PreferenceRewardTrainer(member, reward_cfg, seed=int(s.generate_state(1)[0]))
            for member, s in zip(ensemble.members, trainer_seeds)
        ]

    replay: deque[Segment] = deque(maxlen=config.replay_windows)
    segments_by_id: dict[int, Segment] = {}
    labeled_ids: set[int] = set()
    next_segment_id = 0
    next_ticket_id = 0
    tickets_issued = 0
    tickets_answered = 0
    pending: dict[int, QueryTicket] = {}
    budget_left = config.query_budget
    curve: list[dict] = []
    rounds: list[dict] = []

    def reward_fn(states, actions):
        return ensemble.mean_reward_batch(states, actions)

    def on_episode(buffer):
        nonlocal next_segment_id
        for seg in episode_to_segments(buffer, config.segment_len, config.gamma_reward, next_segment_id):
            next_segment_id = seg.id + 1
            replay.append(seg)
            segments_by_id[seg.id] = seg
            if len(segments_by_id) > 4 * config.replay_windows:
                alive = {s.id for s in replay} | labeled_ids | {
                    sid for t in pending.values() for sid in t.segment_ids
                }
                for dead in [k for k in segments_by_id if k not in alive]:
                    del segments_by_id[dead]

    def record_eval():
        mean, std = evaluate_policy(
            eval_env, learner.policy, config.eval_episodes,
            seed=int(eval_seed_rng.integers(2**31)),
        )
        spec_len = spec.episode_len
        zero_noise_learned = _learned_eval_return(eval_env, learner, ensemble, spec_len)
        row = {
            "step": learner.steps_done,
            "mean_gt_return": mean,
            "std_gt_return": std,
            "mean_learned_return": zero_noise_learned,
        }
        curve.append(row)
        if stats_sink is not None:
            stats_sink.push_curve(row)

    def append_answer(ticket: QueryTicket, answer: TeacherAnswer):
        source = "human" if answer.source == "human" else "synthetic"
        if ticket.kind == "rating":
            seg = segments_by_id[ticket.segment_ids[0]]
            dataset.append(seg, RatingLabel(segment_id=seg.id, class_index=answer.rating, source=source))
            labeled_ids.add(seg.id)
        else:
            first = segments_by_id[ticket.segment_ids[0]]
            second = segments_by_id[ticket.segment_ids[1]]
            dataset.append(
                first, second,
                PreferenceLabel(
                    first_segment_id=first.id, second_segment_id=second.id,
                    preferred=answer.preferred, source=source,
                ),
            )
            labeled_ids.update((first.id, second.id))

    def query_and_fit_round():
        nonlocal next_ticket_id, tickets_issued, tickets_answered, budget_left
        issued_now: list[QueryTicket] = []
        candidates = [s for s in replay if s.id not in labeled_ids]
        room = min(config.queries_per_round, budget_left - len(pending))
        if candidates and room > 0:
            pool = refresh_pool(candidates, config.pool_size, seed=int(pool_rng.integers(2**31)))
            if config.modality == "rating":
                issued_now = select_rating_queries(
                    pool, ensemble, config.gamma_reward, room, next_ticket_id,
                    issued_step=learner.steps_done, rng=query_rng,
                )
            elif len(pool) >= 2:
                issued_now = select_preference_queries(
                    pool, ensemble, config.gamma_reward, room, next_ticket_id,
                    issued_step=learner.steps_done, rng=query_rng,
                )
            next_ticket_id += len(issued_now)
            tickets_issued += len(issued_now)
            for ticket in issued_now:
                pending[ticket.ticket_id] = ticket

        frames = None
        if hasattr(teacher_queue, "wants_frames") and teacher_queue.wants_frames:
            frames = {
                t.ticket_id: [render_trace(env, segments_by_id[sid]) for sid in t.segment_ids]
                for t in issued_now
            }
        answers = teacher_queue.collect_answers(
            issued_now, segments_by_id, frames_by_ticket=frames,
            timeout_s=config.answer_timeout_s,
        )
        new_labels = 0
        for answer in answers:
            ticket = pending.pop(answer.ticket_id, None)
            if ticket is None:
                continue  # duplicate or stale answer; queue already rejected
            append_answer(ticket, answer)
            tickets_answered += 1
            budget_left -= 1
            new_labels += 1

        stats_rows = []
        if new_labels and len(dataset) > 0:
            for trainer in trainers:
                stats_rows.append(trainer.fit_round(dataset.snapshot()))
        round_info = {
            "step": learner.steps_done,
            "tickets_issued": len(issued_now),
            "answers": new_labels,
            "labels_total": len(dataset),
            "budget_left": budget_left,
            "reward_loss": float(np.mean([s.mean_loss for s in stats_rows])) if stats_rows else None,
            "boundaries": stats_rows[0].boundaries if stats_rows else None,
            "r_min": stats_rows[0].r_min if stats_rows else None,
            "r_max": stats_rows[0].r_max if stats_rows else None,
        }
        rounds.append(round_info)
        if stats_sink is not None:
            stats_sink.update_dataset_stats(_dataset_stats(dataset, config, budget_left))

    record_eval()
    next_round = config.reward_update_interval
    next_eval = config.eval_interval
    while learner.steps_done < config.total_steps:
        boundary = min(
            next_round if budget_left > 0 or pending else config.total_steps,
            next_eval,
            config.total_steps,
        )
        block = boundary - learner.steps_done
        if block > 0:
            in_warmup = learner.steps_done < config.policy_warmup_steps
            learner.run_steps(block, reward_fn, episode_hook=on_episode, update=not in_warmup)
        if learner.steps_done >= next_round:
            if budget_left > 0 or pending:
                query_and_fit_round()
            next_round += config.reward_update_interval
        if learner.steps_done >= next_eval:
            record_eval()
            next_eval += config.eval_interval

    if curve[-1]["step"] != learner.steps_done:
        record_eval()

    record = RunRecord(
        config=config.to_dict(),
        config_hash=config.config_hash(),
        curve=curve,
        rounds=rounds,
        labels_total=len(dataset),
        tickets_issued=tickets_issued,
        tickets_answered=tickets_answered,
        final_eval_mean=curve[-1]["mean_gt_return"],
        final_eval_std=curve[-1]["std_gt_return"],
        wall_time_s=time.time() - started,
    )
    if config.out_dir is not None:
        _save_artifacts(Path(config.out_dir), config, record, dataset, ensemble, learner)
    return record


def _learned_eval_return(eval_env, learner, ensemble, episode_len) -> float:
    """Learned-reward return of one deterministic episode, for the curve."""
    buffer = _deterministic_episode(eval_env, learner)
    rewards = ensemble.mean_reward_batch(buffer[0][:episode_len], buffer[1])
    return float(rewards.sum())


def _deterministic_episode(env, learner):
    from . import _kernels

    spec = env.spec
    zero_noise = np.zeros((spec.episode_len, spec.action_dim))
    low = np.full(spec.action_dim, spec.action_low)
    high = np.full(spec.action_dim, spec.action_high)
    env.reset(seed=0)
    if env.kernel_kind is not None:
        obs, raw, _ = _kernels.rollout_episode(
            env.kernel_kind, env.kernel_params(), env.internal_state(),
            learner.policy.mean_net.weights, learner.policy.mean_net.biases,
            learner.policy.log_std, zero_noise, low, high,
        )
        return obs, np.clip(raw, low, high)
    state = env.reset(seed=0)
    obs = np.empty((spec.episode_len + 1, spec.state_dim))
    acts = np.empty((spec.episode_len, spec.action_dim))
    for t in range(spec.episode_len):
        obs[t] = state
        acts[t] = np.clip(learner.policy.mean_actions(state[None, :])[0], low, high)
        state = env.step(acts[t]).next_state
    obs[-1] = state
    return obs, acts


def _dataset_stats(dataset, config: ExperimentConfig, budget_left: int) -> dict:
    if isinstance(dataset, RatedDataset):
        counts = dataset.class_counts().tolist()
    else:
        firsts = sum(1 for _, _, lab in dataset.entries if lab.preferred == "first")
        counts = [firsts, len(dataset) - firsts]
    return {
        "labels_total": len(dataset),
        "class_counts": counts,
        "budget_remaining": budget_left,
    }


def _save_artifacts(out_dir: Path, config: ExperimentConfig, record: RunRecord,
                    dataset, ensemble: RewardEnsemble, learner: PolicyLearner) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "config.json").write_text(json.dumps(config.to_dict(), indent=2, sort_keys=True) + "\n")
    (out_dir / "run.json").write_text(json.dumps(record.to_dict(), indent=2, sort_keys=True) + "\n")
    write_curve_csv(out_dir / "curve.csv", record.curve)
    if isinstance(dataset, RatedDataset):
        save_rated_dataset(out_dir / "dataset.jsonl", dataset)
    else:
        (out_dir / "dataset.jsonl").write_bytes(serialize_preference_dataset(dataset))
    for i, member in enumerate(ensemble.members):
        member.save(out_dir / f"reward_member_{i}.bin")
    learner.policy.save(out_dir / "policy.bin")


# -- sweeps -----------------------------------------------------------------


def expand_sweep(sweep_spec: dict) -> list[tuple[str, ExperimentConfig]]:
    """A sweep file holds a base config, named arm overrides, and a seed
    list; every arm runs on every seed."""
    base = sweep_spec.get("base", {})
    seeds = sweep_spec.get("seeds", [0])
    arms = sweep_spec.get("arms")
    if not arms:
        raise ValueError("sweep spec needs a non-empty 'arms' list")
    jobs = []
    for arm in arms:
        arm = dict(arm)
        name = arm.pop("name", None)
        if name is None:
            raise ValueError("every sweep arm needs a 'name'")
        for seed in seeds:
            merged = {**base, **arm, "seed": seed}
            merged.pop("out_dir", None)
            jobs.append((name, ExperimentConfig(**merged, out_dir=None)))
    return jobs


def sweep(sweep_spec: dict, out_dir: str | Path) -> Path:
    """Run all (arm, seed) jobs with config-hash caching, then emit
    summary.csv of mean +/- standard error per arm per eval checkpoint."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    jobs = expand_sweep(sweep_spec)
    results: dict[str, list[RunRecord]] = {}
    failures: list[dict] = []
    for name, config in jobs:
        run_dir = out_dir / name / f"seed-{config.seed}"
        config = dataclasses.replace(config, out_dir=str(run_dir))
        run_json = run_dir / "run.json"
        record = None
        if run_json.exists():
            cached = json.loads(run_json.read_text())
            if cached.get("config_hash") == config.config_hash():
                record = RunRecord(**cached)
        if record is None:
            try:
                record = run_experiment(config)
            except Exception as exc:  # noqa: BLE001 - a failed run must not kill the sweep
                failures.append({"arm": name, "seed": config.seed, "error": repr(exc)})
                continue
        results.setdefault(name, []).append(record)

    summary_path = out_dir / "summary.csv"
    with open(summary_path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["arm", "step", "mean_gt_return", "stderr_gt_return", "n_seeds"])
        for name, records in results.items():
            by_step: dict[int, list[float]] = {}
            for record in records:
                for row in record.curve:
                    by_step.setdefault(row["step"], []).append(row["mean_gt_return"])
            for step in sorted(by_step):
                values = np.asarray(by_step[step])
                stderr = float(values.std(ddof=1) / np.sqrt(values.size)) if values.size > 1 else 0.0
                writer.writerow([name, step, repr(float(values.mean())), repr(stderr), values.size])
    (out_dir / "sweep_manifest.json").write_text(
        json.dumps(
            {
                "jobs": [{"arm": n, "seed": c.seed, "config_hash": c.config_hash()} for n, c in jobs],
                "failures": failures,
            },
            indent=2,
        )
        + "\n"
    )
    return summary_path
