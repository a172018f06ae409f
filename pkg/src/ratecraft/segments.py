"""Trajectory segments, labels, and the growing labeled dataset.

Segments are immutable after creation; labels reference segments by id so
one segment can carry a rating and also take part in preference pairs.
Ground-truth returns are recorded at collection time and never recomputed.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field

import numpy as np

DATASET_FORMAT = "ratecraft-dataset"
DATASET_VERSION = "v1"


@dataclass(frozen=True)
class Segment:
    """Fixed-length window of (state, action) pairs from one rollout."""

    id: int
    states: np.ndarray  # (L, state_dim)
    actions: np.ndarray  # (L, action_dim)
    gt_return: float | None = None  # hidden ground truth, teacher/eval only

    def __post_init__(self):
        states = np.asarray(self.states, dtype=np.float64)
        actions = np.asarray(self.actions, dtype=np.float64)
        if states.ndim != 2 or actions.ndim != 2:
            raise ValueError("states and actions must be 2-d (steps, dim)")
        if len(states) != len(actions):
            raise ValueError(f"{len(states)} states vs {len(actions)} actions")
        if len(states) < 1:
            raise ValueError("segments must contain at least one step")
        states.setflags(write=False)
        actions.setflags(write=False)
        object.__setattr__(self, "states", states)
        object.__setattr__(self, "actions", actions)

    def __len__(self) -> int:
        return len(self.states)


@dataclass(frozen=True)
class RatingLabel:
    segment_id: int
    class_index: int
    source: str = "synthetic"  # synthetic | human
    timestamp: float = field(default_factory=time.time)

    def __post_init__(self):
        if self.class_index < 0:
            raise ValueError(f"rating class must be >= 0, got {self.class_index}")
        if self.source not in ("synthetic", "human"):
            raise ValueError(f"unknown label source {self.source!r}")


@dataclass(frozen=True)
class PreferenceLabel:
    first_segment_id: int
    second_segment_id: int
    preferred: str  # "first" | "second"
    source: str = "synthetic"
    timestamp: float = field(default_factory=time.time)

    def __post_init__(self):
        if self.first_segment_id == self.second_segment_id:
            raise ValueError("preference pair must involve two distinct segments")
        if self.preferred not in ("first", "second"):
            raise ValueError(f"preferred must be 'first' or 'second', got {self.preferred!r}")
        if self.source not in ("synthetic", "human"):
            raise ValueError(f"unknown label source {self.source!r}")


class RatedDataset:
    """Labeled set of (segment, rating) pairs with per-class counts.

    Appends are O(1); cumulative counts are derived on demand. Mutation is
    expected to flow through a single writer (the harness queue); snapshot()
    hands out an independent copy safe to read from other threads.
    """

    def __init__(self, n_classes: int, segment_len: int | None = None):
        if n_classes < 1:
            raise ValueError("need at least one rating class")
        self.n_classes = int(n_classes)
        self.segment_len = segment_len
        self.entries: list[tuple[Segment, RatingLabel]] = []
        self._counts = np.zeros(self.n_classes, dtype=np.int64)

    def __len__(self) -> int:
        return len(self.entries)

    def append(self, segment: Segment, label: RatingLabel) -> None:
        if label.class_index >= self.n_classes:
            raise ValueError(
                f"class {label.class_index} out of range for {self.n_classes} classes"
            )
        if label.segment_id != segment.id:
            raise ValueError("label does not reference the given segment")
        if self.segment_len is None:
            self.segment_len = len(segment)
        elif len(segment) != self.segment_len:
            raise ValueError(f"segment length {len(segment)} != dataset length {self.segment_len}")
        self.entries.append((segment, label))
        self._counts[label.class_index] += 1

    def class_counts(self) -> np.ndarray:
        """Number of labels per class; sums to len(self)."""
        return self._counts.copy()

    def cumulative_counts(self) -> np.ndarray:
        return np.cumsum(self._counts)

    def segments(self) -> list[Segment]:
        return [seg for seg, _ in self.entries]

    def labels(self) -> list[RatingLabel]:
        return [lab for _, lab in self.entries]

    def observed_classes(self) -> np.ndarray:
        return np.asarray([lab.class_index for _, lab in self.entries], dtype=np.int64)

    def snapshot(self) -> "RatedDataset":
        dup = RatedDataset(self.n_classes, self.segment_len)
        dup.entries = list(self.entries)
        dup._counts = self._counts.copy()
        return dup


class DatasetParseError(ValueError):
    def __init__(self, line_no: int, message: str):
        super().__init__(f"line {line_no}: {message}")
        self.line_no = line_no


def _segment_record(segment: Segment) -> dict:
    return {
        "id": segment.id,
        "states": segment.states.tolist(),
        "actions": segment.actions.tolist(),
        "gt_return": None if segment.gt_return is None else float(segment.gt_return),
    }


def serialize_rated_dataset(dataset: RatedDataset) -> bytes:
    """Line-delimited text form: header then one JSON record per entry."""
    seg_len = dataset.segment_len if dataset.segment_len is not None else 0
    lines = [f"{DATASET_FORMAT} {DATASET_VERSION} n={dataset.n_classes} L={seg_len}"]
    for segment, label in dataset.entries:
        record = _segment_record(segment)
        record.update(
            label_kind="rating",
            label_value=label.class_index,
            source=label.source,
            ts=label.timestamp,
        )
        lines.append(json.dumps(record))
    return ("\n".join(lines) + "\n").encode("utf-8")


def deserialize_rated_dataset(data: bytes) -> RatedDataset:
    text = data.decode("utf-8")
    lines = text.splitlines()
    if not lines:
        raise DatasetParseError(1, "empty file, missing header")
    header = lines[0].split()
    if len(header) != 4 or header[0] != DATASET_FORMAT or header[1] != DATASET_VERSION:
        raise DatasetParseError(1, f"bad header {lines[0]!r}")
    try:
        n = int(header[2].removeprefix("n="))
        seg_len = int(header[3].removeprefix("L="))
    except ValueError as exc:
        raise DatasetParseError(1, f"bad header fields: {exc}") from exc
    dataset = RatedDataset(n, seg_len or None)
    for line_no, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        try:
            record = json.loads(line)
            if record["label_kind"] != "rating":
                raise ValueError(f"unexpected label_kind {record['label_kind']!r}")
            segment = Segment(
                id=int(record["id"]),
                states=np.asarray(record["states"], dtype=np.float64),
                actions=np.asarray(record["actions"], dtype=np.float64),
                gt_return=None if record["gt_return"] is None else float(record["gt_return"]),
            )
            label = RatingLabel(
                segment_id=segment.id,
                class_index=int(record["label_value"]),
                source=record["source"],
                timestamp=float(record["ts"]),
            )
        except (KeyError, ValueError, TypeError) as exc:
            raise DatasetParseError(line_no, str(exc)) from exc
        dataset.append(segment, label)
    return dataset


def save_rated_dataset(path, dataset: RatedDataset) -> None:
    with open(path, "wb") as fh:
        fh.write(serialize_rated_dataset(dataset))


def load_rated_dataset(path) -> RatedDataset:
    with open(path, "rb") as fh:
        return deserialize_rated_dataset(fh.read())


class PreferenceDataset:
    """Labeled segment pairs for the preference baseline."""

    def __init__(self, segment_len: int | None = None):
        self.segment_len = segment_len
        self.entries: list[tuple[Segment, Segment, PreferenceLabel]] = []

    def __len__(self) -> int:
        return len(self.entries)

    def append(self, first: Segment, second: Segment, label: PreferenceLabel) -> None:
        if (label.first_segment_id, label.second_segment_id) != (first.id, second.id):
            raise ValueError("label does not reference the given segment pair")
        for seg in (first, second):
            if self.segment_len is None:
                self.segment_len = len(seg)
            elif len(seg) != self.segment_len:
                raise ValueError(f"segment length {len(seg)} != dataset length {self.segment_len}")
        self.entries.append((first, second, label))

    def snapshot(self) -> "PreferenceDataset":
        dup = PreferenceDataset(self.segment_len)
        dup.entries = list(self.entries)
        return dup


def serialize_preference_dataset(dataset: PreferenceDataset) -> bytes:
    """Same line schema as rated datasets; each pair becomes two lines that
    share a pair index in label_value."""
    seg_len = dataset.segment_len if dataset.segment_len is not None else 0
    lines = [f"{DATASET_FORMAT} {DATASET_VERSION} n=2 L={seg_len}"]
    for pair_no, (first, second, label) in enumerate(dataset.entries):
        for position, segment in (("first", first), ("second", second)):
            record = _segment_record(segment)
            record.update(
                label_kind="preference",
                label_value={"pair": pair_no, "position": position, "preferred": label.preferred},
                source=label.source,
                ts=label.timestamp,
            )
            lines.append(json.dumps(record))
    return ("\n".join(lines) + "\n").encode("utf-8")


def deserialize_preference_dataset(data: bytes) -> PreferenceDataset:
    lines = data.decode("utf-8").splitlines()
    if not lines:
        raise DatasetParseError(1, "empty file, missing header")
    dataset = PreferenceDataset()
    halves: dict[int, dict] = {}
    for line_no, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        try:
            record = json.loads(line)
            if record["label_kind"] != "preference":
                raise ValueError(f"unexpected label_kind {record['label_kind']!r}")
            value = record["label_value"]
            segment = Segment(
                id=int(record["id"]),
                states=np.asarray(record["states"], dtype=np.float64),
                actions=np.asarray(record["actions"], dtype=np.float64),
                gt_return=None if record["gt_return"] is None else float(record["gt_return"]),
            )
            half = halves.setdefault(int(value["pair"]), {})
            half[value["position"]] = segment
            half["preferred"] = value["preferred"]
            half["source"] = record["source"]
            half["ts"] = float(record["ts"])
        except (KeyError, ValueError, TypeError) as exc:
            raise DatasetParseError(line_no, str(exc)) from exc
    for pair_no in sorted(halves):
        half = halves[pair_no]
        if "first" not in half or "second" not in half:
            raise DatasetParseError(0, f"pair {pair_no} is missing one side")
        label = PreferenceLabel(
            first_segment_id=half["first"].id,
            second_segment_id=half["second"].id,
            preferred=half["preferred"],
            source=half["source"],
            timestamp=half["ts"],
        )
        dataset.append(half["first"], half["second"], label)
    return dataset
