"""Query selection by ensemble disagreement.

Rating queries pick the candidate whose predicted returns spread widest
across ensemble members; preference queries pick the sampled pair whose
per-member preference probabilities spread widest. Population standard
deviation throughout (members are few and fixed), ties resolved by lowest
segment id so selection is order-independent.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .preference import preference_probability
from .reward import RewardEnsemble
from .segments import Segment


@dataclass(frozen=True)
class QueryTicket:
    ticket_id: int
    kind: str  # "rating" | "preference"
    segment_ids: tuple[int, ...]
    issued_step: int = 0

    def __post_init__(self):
        if self.kind not in ("rating", "preference"):
            raise ValueError(f"unknown ticket kind {self.kind!r}")
        expected = 1 if self.kind == "rating" else 2
        if len(self.segment_ids) != expected:
            raise ValueError(f"{self.kind} ticket needs {expected} segment id(s)")


@dataclass(frozen=True)
class TeacherAnswer:
    ticket_id: int
    rating: int | None = None
    preferred: str | None = None
    source: str = "synthetic"
    latency_s: float = 0.0


def refresh_pool(replay: list[Segment], size: int, seed: int) -> list[Segment]:
    """Uniform sample without replacement from recent rollout segments."""
    if not replay:
        raise ValueError("cannot refresh the candidate pool from an empty replay")
    rng = np.random.default_rng(seed)
    if len(replay) <= size:
        return list(replay)
    picked = rng.choice(len(replay), size=size, replace=False)
    return [replay[i] for i in picked]


def _population_std(values: np.ndarray, axis: int = 0) -> np.ndarray:
    return values.std(axis=axis, ddof=0)


def select_rating_query(pool: list[Segment], ensemble: RewardEnsemble, gamma: float,
                        ticket_id: int, issued_step: int = 0,
                        rng: np.random.Generator | None = None) -> QueryTicket:
    """Segment with the largest per-member return spread; a one-member
    ensemble degrades to uniform random choice."""
    if not pool:
        raise ValueError("candidate pool is empty")
    if len(ensemble) < 2:
        if rng is None:
            raise ValueError("single-member ensembles need an rng for random selection")
        chosen = pool[int(rng.integers(len(pool)))]
        return QueryTicket(ticket_id, "rating", (chosen.id,), issued_step)
    returns = ensemble.member_returns(pool, gamma)  # (members, pool)
    stds = _population_std(returns)
    best = stds.max()
    chosen_id = min(seg.id for seg, s in zip(pool, stds) if s == best)
    return QueryTicket(ticket_id, "rating", (chosen_id,), issued_step)


def select_preference_query(pool: list[Segment], ensemble: RewardEnsemble, gamma: float,
                            ticket_id: int, issued_step: int = 0,
                            rng: np.random.Generator | None = None,
                            n_pairs: int | None = None) -> QueryTicket:
    """Pair (among n_pairs random candidates) whose per-member preference
    probabilities spread widest."""
    if len(pool) < 2:
        raise ValueError("need at least two candidates to form a pair")
    if rng is None:
        raise ValueError("preference selection draws candidate pairs; rng required")
    if n_pairs is None:
        n_pairs = len(pool)
    pairs = set()
    while len(pairs) < n_pairs:
        i, j = rng.integers(len(pool)), rng.integers(len(pool))
        if pool[i].id == pool[j].id:
            continue
        a, b = sorted((int(i), int(j)), key=lambda idx: pool[idx].id)
        pairs.add((a, b))
        if len(pairs) >= len(pool) * (len(pool) - 1) // 2:
            break
    pair_list = sorted(pairs, key=lambda p: (pool[p[0]].id, pool[p[1]].id))

    if len(ensemble) < 2:
        a, b = pair_list[int(rng.integers(len(pair_list)))]
        return QueryTicket(ticket_id, "preference", (pool[a].id, pool[b].id), issued_step)

    returns = ensemble.member_returns(pool, gamma)  # (members, pool)
    best_key: tuple | None = None
    for a, b in pair_list:
        probs = preference_probability(returns[:, a], returns[:, b])
        spread = float(_population_std(np.asarray(probs)))
        key = (-spread, pool[a].id, pool[b].id)
        if best_key is None or key < best_key:
            best_key = key
    return QueryTicket(ticket_id, "preference", (best_key[1], best_key[2]), issued_step)


def select_rating_queries(pool: list[Segment], ensemble: RewardEnsemble, gamma: float,
                          count: int, first_ticket_id: int, issued_step: int = 0,
                          rng: np.random.Generator | None = None) -> list[QueryTicket]:
    """Batched form of select_rating_query with removal: the top `count`
    distinct segments ranked by (spread desc, id asc), computing the pool's
    ensemble returns once."""
    if not pool:
        raise ValueError("candidate pool is empty")
    count = min(count, len(pool))
    if len(ensemble) < 2:
        if rng is None:
            raise ValueError("single-member ensembles need an rng for random selection")
        picked = rng.choice(len(pool), size=count, replace=False)
        return [
            QueryTicket(first_ticket_id + i, "rating", (pool[int(p)].id,), issued_step)
            for i, p in enumerate(picked)
        ]
    returns = ensemble.member_returns(pool, gamma)
    stds = _population_std(returns)
    ranked = sorted(range(len(pool)), key=lambda i: (-stds[i], pool[i].id))
    return [
        QueryTicket(first_ticket_id + i, "rating", (pool[ranked[i]].id,), issued_step)
        for i in range(count)
    ]


def select_preference_queries(pool: list[Segment], ensemble: RewardEnsemble, gamma: float,
                              count: int, first_ticket_id: int, issued_step: int = 0,
                              rng: np.random.Generator | None = None,
                              n_pairs: int | None = None) -> list[QueryTicket]:
    """Batched preference selection: one pair draw, one return computation,
    then greedy picks by (spread desc, id pair asc) over segment-disjoint
    pairs."""
    if len(pool) < 2:
        raise ValueError("need at least two candidates to form a pair")
    if rng is None:
        raise ValueError("preference selection draws candidate pairs; rng required")
    if n_pairs is None:
        n_pairs = len(pool)
    pairs = set()
    while len(pairs) < n_pairs:
        i, j = rng.integers(len(pool)), rng.integers(len(pool))
        if pool[i].id == pool[j].id:
            continue
        a, b = sorted((int(i), int(j)), key=lambda idx: pool[idx].id)
        pairs.add((a, b))
        if len(pairs) >= len(pool) * (len(pool) - 1) // 2:
            break
    pair_list = sorted(pairs, key=lambda p: (pool[p[0]].id, pool[p[1]].id))

    if len(ensemble) < 2:
        order = rng.permutation(len(pair_list))
    else:
        returns = ensemble.member_returns(pool, gamma)
        keys = []
        for a, b in pair_list:
            probs = preference_probability(returns[:, a], returns[:, b])
            keys.append((-float(_population_std(np.asarray(probs))), pool[a].id, pool[b].id))
        order = sorted(range(len(pair_list)), key=lambda i: keys[i])

    tickets: list[QueryTicket] = []
    used: set[int] = set()
    for idx in order:
        a, b = pair_list[idx]
        if pool[a].id in used or pool[b].id in used:
            continue
        tickets.append(
            QueryTicket(first_ticket_id + len(tickets), "preference",
                        (pool[a].id, pool[b].id), issued_step)
        )
        used.update((pool[a].id, pool[b].id))
        if len(tickets) >= count:
            break
    return tickets
