"""Acceptance suite: one test per gate criterion, each printing a PASS/FAIL
line (run with `pytest tests/test_acceptance.py -v -s`).

Scaled-down trend reproduction plus property suites; full-scale deep-RL
benchmark numbers are out of desk scope by design. Heavy fixtures (the
30-run sweep, oracle runs) are module-scoped;
set RATECRAFT_ACCEPT_CACHE=<dir> to reuse finished runs across pytest
invocations via the sweep's config-hash cache.
"""

import math
import os
import time

import numpy as np
import pytest
from scipy.stats import spearmanr

from ratecraft.envs import LineWalker, collect_segments
from ratecraft.harness import ExperimentConfig, run_experiment, sweep
from ratecraft.mlp import MLP
from ratecraft.policy import PolicyOptConfig, evaluate_policy, train_policy
from ratecraft.preference import preference_loss
from ratecraft.rating import (
    ClassBoundaries,
    ReturnNormalizer,
    class_probabilities,
    class_scores,
    fit_boundaries,
    predict_class,
    rating_loss,
)
from ratecraft.reward import RewardNet
from ratecraft.segments import RatedDataset, RatingLabel, Segment
from ratecraft.teacher import SyntheticRatingTeacher, attainable_segment_return_range
from ratecraft.training import (
    RatingRewardTrainer,
    RewardTrainConfig,
    preference_loss_param_grad,
    rating_loss_param_grad,
)

CASES = 10_000
SUITE_SECONDS: dict[str, float] = {}


def report(name: str, ok: bool, detail: str = "") -> None:
    print(f"[{'PASS' if ok else 'FAIL'}] {name}" + (f" — {detail}" if detail else ""))
    assert ok, f"{name}: {detail}"


def timed(name):
    class _Timer:
        def __enter__(self):
            self.start = time.perf_counter()
            return self

        def __exit__(self, *exc):
            SUITE_SECONDS[name] = time.perf_counter() - self.start

    return _Timer()


def random_boundaries(rng, n):
    inner = np.sort(rng.uniform(0.0, 1.0, size=n - 1))
    return ClassBoundaries((0.0, *inner.tolist(), 1.0))


# -- criterion: probability-model golden test ---------------------------------


class TestGoldenProbabilityModel:
    def test_five_class_sharpness_30(self):
        start = time.perf_counter()
        boundaries = ClassBoundaries((0.0, 0.2, 0.4, 0.6, 0.8, 1.0))
        probs = class_probabilities(0.3, boundaries, 30.0)
        # hand-evaluated softmax over exponents (-0.9, 0.3, -0.9, -4.5, -10.5)
        exps = [math.exp(e) for e in (-0.9, 0.3, -0.9, -4.5, -10.5)]
        oracle = np.asarray(exps) / sum(exps)
        elapsed = time.perf_counter() - start
        ok = (
            abs(probs[1] - 0.6209) < 1e-3
            and np.allclose(probs, oracle, atol=1e-9)
            and abs(probs.sum() - 1.0) < 1e-9
            and elapsed < 1.0
        )
        report(
            "golden probability model (n=5, sharpness=30, x=0.3)",
            ok,
            f"Q(1)={probs[1]:.6f} vs 0.6209, sum={probs.sum():.12f}, {elapsed*1e3:.1f}ms",
        )


# -- criterion: invariant suites, 1e4 cases each, < 30 s total ----------------


class TestInvariantSuites:
    def test_normalization_and_positivity(self):
        rng = np.random.default_rng(101)
        with timed("normalization"):
            ns = rng.integers(1, 7, size=CASES)
            for i in range(CASES):
                n = int(ns[i])
                boundaries = random_boundaries(rng, n)
                # positivity guaranteed in float64 while the score spread
                # stays below ~709 nats; sharpness <= 500 keeps margin
                sharpness = float(rng.uniform(1e-3, 500.0))
                probs = class_probabilities(float(rng.uniform(0, 1)), boundaries, sharpness)
                assert abs(probs.sum() - 1.0) < 1e-9
                assert (probs > 0.0).all() and (probs < 1.0 + 1e-12).all()
            # overflow-safety at the full sharpness bound: finite, sums to 1
            for _ in range(100):
                probs = class_probabilities(
                    float(rng.uniform(0, 1)), random_boundaries(rng, 5), 1e4
                )
                assert np.isfinite(probs).all() and abs(probs.sum() - 1.0) < 1e-9
        report("invariants: Q normalization and positivity", True,
               f"{CASES} cases in {SUITE_SECONDS['normalization']:.1f}s")

    def test_interval_argmax(self):
        rng = np.random.default_rng(102)
        with timed("interval-argmax"):
            for _ in range(CASES):
                n = int(rng.integers(2, 7))
                boundaries = random_boundaries(rng, n)
                b = boundaries.as_array()
                i = int(rng.integers(0, n))
                if b[i + 1] - b[i] < 1e-9:
                    continue
                x = float(rng.uniform(b[i] + 1e-12, b[i + 1] - 1e-12))
                assert predict_class(x, boundaries, float(rng.uniform(0.5, 200.0))) == i
        report("invariants: interval argmax", True,
               f"{CASES} cases in {SUITE_SECONDS['interval-argmax']:.1f}s")

    def test_midpoint_maximum_and_monotonicity(self):
        # the probability curves are exactly unimodal (log-concave) with the
        # edge classes monotone toward 0/1; the midpoint carries the class
        # maximum in value for interior classes of equal-width boundaries,
        # and the class score peaks exactly at the midpoint for any
        # boundaries (softmax competition shifts the probability peak)
        rng = np.random.default_rng(103)
        grid = np.linspace(0.0, 1.0, 1001)
        with timed("midpoint-monotonicity"):
            # each config checks every class, so configs x classes > 1e4
            for case in range(CASES // 4):
                n = int(rng.integers(2, 7))
                equal_width = case % 2 == 0
                boundaries = ClassBoundaries.equal_width(n) if equal_width else random_boundaries(rng, n)
                b = boundaries.as_array()
                width_floor = 0.5 / (1.0 / n) ** 2
                sharpness = float(rng.uniform(width_floor if equal_width else 1.0, 1000.0))
                probs = class_probabilities(grid, boundaries, sharpness)
                assert (np.diff(probs[:, 0]) <= 1e-12).all()
                assert (np.diff(probs[:, n - 1]) >= -1e-12).all()
                for i in range(n):
                    col = probs[:, i]
                    peak = int(np.argmax(col))
                    assert (np.diff(col[: peak + 1]) >= -1e-12).all()
                    assert (np.diff(col[peak:]) <= 1e-12).all()
                    if equal_width and 0 < i < n - 1:
                        mid = 0.5 * (b[i] + b[i + 1])
                        at_mid = class_probabilities(mid, boundaries, sharpness)[i]
                        assert col.max() - at_mid <= 0.01
                # score-level midpoint maximum, arbitrary boundaries
                i = int(rng.integers(0, n))
                mid = 0.5 * (b[i] + b[i + 1])
                scores = class_scores(grid, boundaries, sharpness)[:, i]
                order = np.argsort(np.abs(grid - mid), kind="stable")
                assert (np.diff(scores[order]) <= 1e-9).all()
        report("invariants: midpoint maximum / monotonicity (1e-3 grid)", True,
               f"{CASES // 4} configs x all classes in {SUITE_SECONDS['midpoint-monotonicity']:.1f}s")

    def test_count_matching_against_brute_force(self):
        rng = np.random.default_rng(104)
        values_pool = np.linspace(0.005, 0.995, 20_000)
        with timed("count-matching"):
            for _ in range(CASES):
                n = int(rng.integers(1, 7))
                total = int(rng.integers(1, 60))
                cuts = np.sort(rng.integers(0, total + 1, size=n - 1))
                counts = np.diff([0, *cuts.tolist(), total])
                values = np.sort(rng.choice(values_pool, size=total, replace=False))
                boundaries = fit_boundaries(values, counts)
                b = boundaries.as_array()
                for i in range(n):
                    if i == 0 and n > 1:
                        got = np.sum((values >= b[0]) & (values < b[1]))
                    elif i == n - 1:
                        got = np.sum((values > b[i]) & (values <= b[i + 1]))
                    else:
                        got = np.sum((values > b[i]) & (values < b[i + 1]))
                    assert got == counts[i], (counts, b)
        report("invariants: boundary count matching vs sort-and-partition oracle",
               True, f"{CASES} cases (exact) in {SUITE_SECONDS['count-matching']:.1f}s")

    def test_boundary_monotonicity_with_empty_classes(self):
        rng = np.random.default_rng(105)
        with timed("boundary-monotonicity"):
            for _ in range(CASES):
                n = int(rng.integers(1, 8))
                total = int(rng.integers(1, 40))
                counts = rng.multinomial(total, np.ones(n) / n)  # often has zeros
                values = np.sort(rng.uniform(0, 1, size=total))
                b = fit_boundaries(values, counts).as_array()
                assert b[0] == 0.0 and b[-1] == 1.0
                assert (np.diff(b) >= 0).all()
                for i in range(n):
                    if counts[i] == 0 and 0 < i < n - 1:
                        pass  # zero-width interior classes allowed
        report("invariants: boundary monotonicity incl. empty classes", True,
               f"{CASES} cases in {SUITE_SECONDS['boundary-monotonicity']:.1f}s")

    def test_total_suite_time_under_budget(self):
        total = sum(SUITE_SECONDS.values())
        report("invariant suites total runtime", total < 30.0, f"{total:.1f}s < 30s")


# -- criterion: gradient acceptance -------------------------------------------


def _flat_numerical_grad(loss_fn, net: MLP, eps: float = 1e-5) -> np.ndarray:
    flat = net.get_flat()
    grad = np.zeros_like(flat)
    for i in range(flat.size):
        bumped = flat.copy()
        bumped[i] = flat[i] + eps
        net.set_flat(bumped)
        hi = loss_fn()
        bumped[i] = flat[i] - eps
        net.set_flat(bumped)
        lo = loss_fn()
        grad[i] = (hi - lo) / (2.0 * eps)
    net.set_flat(flat)
    return grad


def _max_rel_err(analytic: np.ndarray, numeric: np.ndarray) -> float:
    mask = np.abs(numeric) > 1e-8
    if not mask.any():
        return 0.0
    return float(np.max(np.abs(analytic[mask] - numeric[mask]) / np.abs(numeric[mask])))


def _random_segments(rng, count, length=5):
    return [
        Segment(
            id=i,
            states=rng.normal(size=(length, 2)),
            actions=rng.normal(size=(length, 1)),
        )
        for i in range(count)
    ]


class TestGradientAcceptance:
    def test_both_losses_match_central_differences(self):
        start = time.perf_counter()
        worst_rating = 0.0
        worst_pref = 0.0
        for instance in range(20):
            rng = np.random.default_rng(1000 + instance)
            net = RewardNet(2, 1, hidden=(6,), seed=instance)
            gamma = float(rng.choice([1.0, 0.95]))

            segments = _random_segments(rng, 6)
            n = int(rng.integers(2, 6))
            classes = rng.integers(0, n, size=6)
            returns = net.segment_returns(segments, gamma)
            normalizer = ReturnNormalizer(float(returns.min()) - 0.5, float(returns.max()) + 0.5)
            boundaries = fit_boundaries(
                np.sort(normalizer.normalize(returns)), np.bincount(classes, minlength=n)
            )
            sharpness = float(rng.uniform(5.0, 60.0))
            _, grads = rating_loss_param_grad(
                net, segments, classes, normalizer, boundaries, sharpness, gamma
            )

            def rating_value():
                r = net.segment_returns(segments, gamma)
                return rating_loss(normalizer.normalize(r), classes, boundaries, sharpness)

            numeric = _flat_numerical_grad(rating_value, net.net)
            worst_rating = max(worst_rating, _max_rel_err(grads.flat(), numeric))

            firsts = _random_segments(rng, 4)
            seconds = _random_segments(np.random.default_rng(2000 + instance), 4)
            prefs = (rng.random(4) > 0.5).astype(np.float64)
            _, pgrads = preference_loss_param_grad(net, firsts, seconds, prefs, gamma)

            def pref_value():
                ra = net.segment_returns(firsts, gamma)
                rb = net.segment_returns(seconds, gamma)
                return preference_loss(ra, rb, prefs)

            numeric = _flat_numerical_grad(pref_value, net.net)
            worst_pref = max(worst_pref, _max_rel_err(pgrads.flat(), numeric))

        elapsed = time.perf_counter() - start
        ok = worst_rating < 1e-4 and worst_pref < 1e-4 and elapsed < 60.0
        report(
            "gradient acceptance (20 nets, eps=1e-5)",
            ok,
            f"max rel err rating {worst_rating:.2e}, preference {worst_pref:.2e}, {elapsed:.1f}s",
        )


# -- criterion: reward identifiability ----------------------------------------


class TestRewardIdentifiability:
    def test_spearman_rank_correlation(self):
        start = time.perf_counter()
        passes = []
        rhos = []
        for seed in range(5):
            env = LineWalker()
            segments = collect_segments(
                env, lambda s, rng: rng.uniform(-1, 1, size=1),
                count=700, segment_len=50, gamma=1.0, seed=seed,
            )
            train, held = segments[:200], segments[200:]
            teacher = SyntheticRatingTeacher(
                4, attainable_segment_return_range(env.spec, 50, 1.0), seed=seed
            )
            dataset = RatedDataset(4, 50)
            for seg in train:
                dataset.append(seg, RatingLabel(segment_id=seg.id, class_index=teacher.rate(seg)))
            net = RewardNet(2, 1, seed=seed)
            trainer = RatingRewardTrainer(
                net, RewardTrainConfig(lr=3e-4, epochs_per_update=200), seed=seed
            )
            trainer.fit_round(dataset)
            learned = net.segment_returns(held, 1.0)
            gt = np.asarray([s.gt_return for s in held])
            rho = float(spearmanr(learned, gt).statistic)
            rhos.append(rho)
            passes.append(rho >= 0.8)
        elapsed = time.perf_counter() - start
        ok = sum(passes) >= 4 and elapsed < 600.0
        report(
            "reward identifiability (200 ratings, n=4, 500 held-out segments)",
            ok,
            f"spearman per seed {[f'{r:.3f}' for r in rhos]}, {elapsed:.0f}s",
        )


# -- heavy shared fixtures: the sweep and the oracle runs ---------------------

SWEEP_SPEC = {
    "base": {
        "env": "line-walker",
        "total_steps": 100_000,
        "query_budget": 200,
        "queries_per_round": 5,
        "reward_update_interval": 2_000,
        "eval_interval": 5_000,
        "eval_episodes": 4,
    },
    "arms": [
        {"name": "rating-n2", "modality": "rating", "n_classes": 2},
        {"name": "rating-n3", "modality": "rating", "n_classes": 3},
        {"name": "rating-n4", "modality": "rating", "n_classes": 4},
        {"name": "rating-n5", "modality": "rating", "n_classes": 5},
        {"name": "rating-n6", "modality": "rating", "n_classes": 6},
        {"name": "preference", "modality": "preference"},
    ],
    "seeds": [0, 1, 2, 3, 4],
}


@pytest.fixture(scope="module")
def sweep_records(tmp_path_factory):
    import json
    from pathlib import Path

    cache = os.environ.get("RATECRAFT_ACCEPT_CACHE")
    out = Path(cache) / "sweep" if cache else tmp_path_factory.mktemp("acceptance-sweep")
    sweep(SWEEP_SPEC, out)
    records: dict[str, list[dict]] = {}
    for arm in SWEEP_SPEC["arms"]:
        name = arm["name"]
        records[name] = []
        for seed in SWEEP_SPEC["seeds"]:
            doc = json.loads((out / name / f"seed-{seed}" / "run.json").read_text())
            records[name].append(doc)
    return records


@pytest.fixture(scope="module")
def oracle_finals():
    finals = {}
    for seed in SWEEP_SPEC["seeds"]:
        env = LineWalker()
        policy, _ = train_policy(
            env, env.reward_from_obs_actions, SWEEP_SPEC["base"]["total_steps"],
            config=PolicyOptConfig(), seed=seed,
        )
        mean, _ = evaluate_policy(LineWalker(), policy, episodes=4, seed=seed)
        finals[seed] = mean
    return finals


# -- criterion: end-to-end rating-trained policy vs oracle ---------------------


class TestEndToEnd:
    def test_rating_trained_policy_reaches_most_of_oracle(self, sweep_records, oracle_finals):
        arm = sweep_records["rating-n4"]
        ratios = []
        for doc, seed in zip(arm, SWEEP_SPEC["seeds"]):
            ratios.append(doc["final_eval_mean"] / oracle_finals[seed])
        median_ratio = float(np.median(ratios))
        wall = sum(doc["wall_time_s"] for doc in arm)
        ok = median_ratio >= 0.70 and wall < 1800.0
        report(
            "end-to-end rating-trained policy (budget 200, n=4) vs oracle",
            ok,
            f"median ratio {median_ratio:.3f} over 5 seeds, arm wall time {wall:.0f}s",
        )


# -- criterion: rating-vs-preference trend under equal budgets -----------------


class TestTrend:
    def test_some_rating_arm_matches_or_beats_preference(self, sweep_records):
        means = {
            name: float(np.mean([doc["final_eval_mean"] for doc in docs]))
            for name, docs in sweep_records.items()
        }
        baseline = means["preference"]
        gated = {f"rating-n{n}": means[f"rating-n{n}"] for n in (3, 4, 5, 6)}
        winners = [name for name, value in gated.items() if value >= baseline]
        detail = ", ".join(f"{k}={v:.1f}" for k, v in means.items())
        # the n=2-vs-larger ordering is reported, not gated (env-dependent)
        n2_rank = sum(means["rating-n2"] >= means[f"rating-n{n}"] for n in (3, 4, 5, 6))
        print(f"[REPORT] n=2 arm beats {n2_rank}/4 larger-n arms "
              f"(ordering is environment-dependent, not gated)")
        report(
            "equal-budget trend: some n in {3..6} >= preference baseline",
            len(winners) > 0,
            f"winners {winners or 'none'}; {detail}",
        )


# -- criterion: determinism ----------------------------------------------------


class TestDeterminism:
    def test_same_seed_byte_identical_curves(self, tmp_path):
        config = dict(
            total_steps=20_000, query_budget=40, queries_per_round=10,
            reward_update_interval=2_000, eval_interval=5_000,
            eval_episodes=2, seed=11,
        )
        blobs = []
        for run in range(2):
            out = tmp_path / f"run{run}"
            run_experiment(ExperimentConfig(out_dir=str(out), **config))
            blobs.append((out / "curve.csv").read_bytes())
        ok = blobs[0] == blobs[1]
        report("determinism: byte-identical curve.csv for same seed", ok,
               f"{len(blobs[0])} bytes compared")


# -- criterion: equal-budget audit ---------------------------------------------


class TestEqualBudgetAudit:
    def test_paired_arms_consume_identical_answer_counts(self, sweep_records):
        answered = {
            name: [doc["tickets_answered"] for doc in docs]
            for name, docs in sweep_records.items()
        }
        counts = {tuple(v) for v in answered.values()}
        all_200 = counts == {(200, 200, 200, 200, 200)}
        labels_match = all(
            doc["labels_total"] == doc["tickets_answered"]
            and doc["tickets_answered"] <= doc["tickets_issued"]
            for docs in sweep_records.values()
            for doc in docs
        )
        ok = all_200 and labels_match
        report(
            "equal-budget audit: identical answer counts, labels == answered tickets",
            ok,
            f"answer counts per arm {sorted(set(tuple(v) for v in answered.values()))}",
        )
