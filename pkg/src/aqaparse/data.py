"""Dataset schema: video samples, transition sets, snippet layout, pairing.

A sample is one action performance: T RGB frames, per-frame binary
foreground masks, an action-type label, a difficulty degree, the judged
score, and the 1-indexed frame timestamps where the action switches
sub-action phase. Timestamps are bin-consistent: the k-th of L' transitions
falls in (floor((k-1)*T/L'), floor(k*T/L')], which is also the search bin
of the constrained argmax used at inference.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import ConfigError, DataError

logger = logging.getLogger(__name__)


def transition_bins(total_frames: int, num_transitions: int) -> list[tuple[int, int]]:
    """Half-open bins (lo, hi] partitioning [1, T] into L' transition ranges."""
    if num_transitions < 1:
        raise ConfigError("num_transitions must be >= 1")
    if total_frames < num_transitions:
        raise ConfigError(
            f"T={total_frames} too short for {num_transitions} transitions"
        )
    edges = [(k * total_frames) // num_transitions for k in range(num_transitions + 1)]
    return [(edges[k], edges[k + 1]) for k in range(num_transitions)]


@dataclass(frozen=True)
class TransitionSet:
    """Strictly increasing 1-indexed transition timestamps over [1, T].

    The L' timestamps split [1, T] into L'+1 steps with half-open frame
    intervals (0, t_1], (t_1, t_2], ..., (t_L', T].
    """

    timestamps: tuple[int, ...]
    total_frames: int

    def __post_init__(self) -> None:
        ts = tuple(int(t) for t in self.timestamps)
        object.__setattr__(self, "timestamps", ts)
        if not ts:
            raise DataError("empty transition set")
        if any(t < 1 or t > self.total_frames for t in ts):
            raise DataError(f"transitions {ts} outside [1, {self.total_frames}]")
        if any(b <= a for a, b in zip(ts, ts[1:])):
            raise DataError(f"transitions not increasing: {ts}")
        if ts[-1] >= self.total_frames:
            raise DataError(
                f"last transition at frame {ts[-1]} leaves an empty final step "
                f"(must be < T={self.total_frames})"
            )
        for k, (lo, hi) in enumerate(transition_bins(self.total_frames, len(ts))):
            if not lo < ts[k] <= hi:
                raise DataError(
                    f"transition {k + 1} at frame {ts[k]} outside its bin ({lo}, {hi}]"
                )

    @property
    def num_transitions(self) -> int:
        return len(self.timestamps)

    @property
    def num_steps(self) -> int:
        return len(self.timestamps) + 1

    def intervals(self) -> tuple[tuple[int, int], ...]:
        """Step intervals as half-open (a, b] frame ranges; a==0 means start."""
        bounds = (0, *self.timestamps, self.total_frames)
        return tuple(zip(bounds[:-1], bounds[1:]))

    def step_lengths(self) -> tuple[int, ...]:
        return tuple(b - a for a, b in self.intervals())


@dataclass(frozen=True)
class VideoSample:
    """One annotated video; arrays are frozen read-only after construction."""

    sample_id: str
    frames: np.ndarray  # [T, H, W, 3] float32 in [0, 1]
    masks: np.ndarray  # [T, H, W] uint8 in {0, 1}
    action_type: str
    difficulty: float
    score: float
    transitions: tuple[int, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "transitions", tuple(int(t) for t in self.transitions))
        problems = []
        f, m = self.frames, self.masks
        if f.ndim != 4 or f.shape[-1] != 3:
            problems.append(f"frames shape {f.shape} is not [T, H, W, 3]")
        elif m.shape != f.shape[:3]:
            problems.append(f"masks shape {m.shape} != frames shape {f.shape[:3]}")
        if f.size and (float(f.min()) < 0.0 or float(f.max()) > 1.0):
            problems.append("frame values outside [0, 1]")
        if m.size and not np.isin(m, (0, 1)).all():
            problems.append("masks contain values other than {0, 1}")
        if not self.difficulty > 0:
            problems.append(f"difficulty {self.difficulty} is not positive")
        if self.score < 0:
            problems.append(f"score {self.score} is negative")
        if not problems:
            try:
                TransitionSet(self.transitions, f.shape[0])
            except DataError as exc:
                problems.append(str(exc))
        if problems:
            raise DataError(f"sample {self.sample_id!r}: " + "; ".join(problems))
        f.setflags(write=False)
        m.setflags(write=False)

    @property
    def num_frames(self) -> int:
        return self.frames.shape[0]

    @property
    def height(self) -> int:
        return self.frames.shape[1]

    @property
    def width(self) -> int:
        return self.frames.shape[2]

    def transition_set(self) -> TransitionSet:
        return TransitionSet(self.transitions, self.num_frames)


@dataclass(frozen=True)
class SnippetLayout:
    """Sliding-window split of a T-frame video into overlapping snippets."""

    num_snippets: int = 9
    snippet_len: int = 16
    stride: int = 10

    def __post_init__(self) -> None:
        if min(self.num_snippets, self.snippet_len, self.stride) < 1:
            raise ConfigError(f"snippet layout fields must be positive: {self}")

    @property
    def total_frames(self) -> int:
        return self.snippet_len + (self.num_snippets - 1) * self.stride

    def starts(self) -> list[int]:
        return [i * self.stride for i in range(self.num_snippets)]

    def check(self, total_frames: int) -> None:
        if self.total_frames != total_frames:
            raise ConfigError(
                f"snippet layout does not cover T={total_frames}: requires "
                f"snippet_len + (num_snippets - 1) * stride = T, got "
                f"{self.snippet_len} + {self.num_snippets - 1} * {self.stride} "
                f"= {self.total_frames}"
            )


def snippetize(frames, layout: SnippetLayout) -> list:
    """Split [T, ...] frames into `num_snippets` windows of `snippet_len`.

    Snippet i covers frames [i*stride, i*stride + snippet_len). Works on any
    array/tensor sliceable along axis 0; raises ConfigError when the layout
    does not tile T exactly.
    """
    layout.check(frames.shape[0])
    return [frames[s : s + layout.snippet_len] for s in layout.starts()]


@dataclass(frozen=True)
class QueryExemplarPair:
    """A scored pair: the query to assess and a same-action-type exemplar."""

    query: VideoSample
    exemplar: VideoSample

    def __post_init__(self) -> None:
        if self.query.action_type != self.exemplar.action_type:
            raise DataError(
                f"pair action types differ: {self.query.action_type!r} vs "
                f"{self.exemplar.action_type!r}"
            )
        if self.query.sample_id == self.exemplar.sample_id:
            raise DataError(f"query and exemplar are the same sample {self.query.sample_id!r}")


def select_exemplars(
    query: VideoSample,
    train_set: Sequence[VideoSample],
    count: int,
    rng: np.random.Generator | int,
) -> list[VideoSample]:
    """Pick `count` same-action-type exemplars, uniformly without replacement.

    Falls back to sampling with replacement (with a logged warning) when the
    eligible pool is smaller than `count`. Deterministic given the rng seed.
    """
    if count < 1:
        raise ConfigError("exemplar count must be >= 1")
    if isinstance(rng, (int, np.integer)):
        rng = np.random.default_rng(rng)
    eligible = [
        s
        for s in train_set
        if s.action_type == query.action_type and s.sample_id != query.sample_id
    ]
    if not eligible:
        raise DataError(
            f"no exemplars with action type {query.action_type!r} for {query.sample_id!r}"
        )
    if len(eligible) >= count:
        idx = rng.choice(len(eligible), size=count, replace=False)
    else:
        logger.warning(
            "only %d eligible exemplars for %s (action type %s), sampling %d with replacement",
            len(eligible), query.sample_id, query.action_type, count,
        )
        idx = rng.choice(len(eligible), size=count, replace=True)
    return [eligible[int(i)] for i in idx]


def split_train_test(
    samples: Sequence[VideoSample], seed: int, train_fraction: float = 0.75
) -> tuple[list[VideoSample], list[VideoSample]]:
    """Deterministic seeded shuffle split (default 75/25)."""
    if not 0.0 < train_fraction < 1.0:
        raise ConfigError(f"train_fraction {train_fraction} outside (0, 1)")
    order = np.random.default_rng(seed).permutation(len(samples))
    n_train = int(len(samples) * train_fraction + 0.5)
    train = [samples[int(i)] for i in order[:n_train]]
    test = [samples[int(i)] for i in order[n_train:]]
    return train, test
