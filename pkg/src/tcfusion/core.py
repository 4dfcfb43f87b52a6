"""Core domain types: labels, tracks, track sets, and window restriction.

Time is an integer scan index k >= 1. A track is a partial map from scans
to state vectors; gaps are allowed (fragmented tracks), so tracks are
stored sparsely as scan -> state mappings rather than dense arrays.

All types here are treated as immutable once constructed; operations
return new values and never mutate their inputs.
"""

from __future__ import annotations

import functools
from dataclasses import dataclass
from typing import Iterable, Iterator, Mapping

import numpy as np


class InvalidWindowError(ValueError):
    """Raised when a time window [j, k] has j > k."""


class UndefinedDistanceError(ValueError):
    """Raised when a distance is undefined for the given inputs (e.g. empty sets)."""


class ConsistencyError(RuntimeError):
    """Internal bookkeeping mismatch (labels missing from a label space, ...)."""


@dataclass(frozen=True, order=True)
class LocalLabel:
    """Track identity within one node: time of birth plus a same-scan index."""

    birth_time: int
    birth_index: int

    def __post_init__(self) -> None:
        if self.birth_time < 1 or self.birth_index < 1:
            raise ValueError(f"invalid local label ({self.birth_time}, {self.birth_index})")


@functools.total_ordering
@dataclass(frozen=True)
class GlobalLabel:
    """Network-wide track identity: a local label qualified by its node id.

    Ordering is lexicographic on (birth_time, node_id), with birth_index as
    a final tie-break so that distinct labels are always strictly ordered.
    """

    local: LocalLabel
    node_id: int

    @property
    def birth_time(self) -> int:
        return self.local.birth_time

    @property
    def birth_index(self) -> int:
        return self.local.birth_index

    def sort_key(self) -> tuple[int, int, int]:
        return (self.local.birth_time, self.node_id, self.local.birth_index)

    def __lt__(self, other: "GlobalLabel") -> bool:
        if not isinstance(other, GlobalLabel):
            return NotImplemented
        return self.sort_key() < other.sort_key()


def label_of(birth_time: int, birth_index: int, node_id: int) -> GlobalLabel:
    return GlobalLabel(LocalLabel(birth_time, birth_index), node_id)


@dataclass(frozen=True, eq=False)
class LabeledState:
    """A state vector paired with its global label."""

    state: np.ndarray
    label: GlobalLabel


def position_of(state: np.ndarray) -> np.ndarray:
    """Project a state vector onto its position components.

    The shipped 2-D constant-velocity convention is [px, vx, py, vy], so
    4-vectors project to indices (0, 2). Shorter vectors are taken as raw
    points and returned unchanged.
    """
    state = np.asarray(state, dtype=float)
    if state.shape[-1] == 4:
        return state[..., (0, 2)]
    return state


class Track:
    """A labelled track: a partial map scan -> state vector.

    The domain may be non-contiguous. Samples are exposed read-only;
    construct a new Track to change anything.
    """

    __slots__ = ("label", "_samples", "_domain")

    def __init__(self, label: GlobalLabel, samples: Mapping[int, np.ndarray]):
        if not samples:
            raise ValueError("track must have at least one sample")
        self.label = label
        self._samples = {int(k): np.asarray(v, dtype=float) for k, v in samples.items()}
        for k, v in self._samples.items():
            if k < 1:
                raise ValueError(f"scan index {k} < 1")
            if not np.all(np.isfinite(v)):
                raise ValueError(f"non-finite state at scan {k}")
        self._domain = tuple(sorted(self._samples))

    @property
    def domain(self) -> tuple[int, ...]:
        return self._domain

    def state_at(self, k: int) -> np.ndarray:
        return self._samples[k]

    def latest_at_or_before(self, k: int) -> np.ndarray | None:
        """Most recent sample at scan <= k, or None if the track starts later."""
        best = None
        for scan in self._domain:
            if scan > k:
                break
            best = scan
        return None if best is None else self._samples[best]

    def __contains__(self, k: int) -> bool:
        return k in self._samples

    def __len__(self) -> int:
        return len(self._samples)

    def items(self) -> Iterator[tuple[int, np.ndarray]]:
        for k in self._domain:
            yield k, self._samples[k]

    def restricted(self, j: int, k: int) -> "Track | None":
        """Restriction to the window [j, k]; None if no samples remain."""
        kept = {s: v for s, v in self._samples.items() if j <= s <= k}
        if not kept:
            return None
        return Track(self.label, kept)

    def __repr__(self) -> str:
        return f"Track({self.label!r}, scans={self._domain})"


class TrackSet:
    """A finite set of tracks with pairwise-distinct labels.

    Iteration order is deterministic: tracks are sorted by global label.
    """

    __slots__ = ("_tracks",)

    def __init__(self, tracks: Iterable[Track] = ()):
        ordered = sorted(tracks, key=lambda t: t.label.sort_key())
        seen: set[GlobalLabel] = set()
        for t in ordered:
            if t.label in seen:
                raise ValueError(f"duplicate label {t.label} in TrackSet")
            seen.add(t.label)
        self._tracks = tuple(ordered)

    def __iter__(self) -> Iterator[Track]:
        return iter(self._tracks)

    def __len__(self) -> int:
        return len(self._tracks)

    def __getitem__(self, i: int) -> Track:
        return self._tracks[i]

    def labels(self) -> tuple[GlobalLabel, ...]:
        return tuple(t.label for t in self._tracks)

    def get(self, label: GlobalLabel) -> Track | None:
        for t in self._tracks:
            if t.label == label:
                return t
        return None

    def __repr__(self) -> str:
        return f"TrackSet(n={len(self._tracks)})"


class LabeledStateSet:
    """Per-scan set of labelled state estimates with distinct labels."""

    __slots__ = ("_states",)

    def __init__(self, states: Iterable[LabeledState] = ()):
        ordered = sorted(states, key=lambda s: s.label.sort_key())
        seen: set[GlobalLabel] = set()
        for s in ordered:
            if s.label in seen:
                raise ValueError(f"duplicate label {s.label} in LabeledStateSet")
            seen.add(s.label)
        self._states = tuple(ordered)

    def __iter__(self) -> Iterator[LabeledState]:
        return iter(self._states)

    def __len__(self) -> int:
        return len(self._states)

    def labels(self) -> tuple[GlobalLabel, ...]:
        return tuple(s.label for s in self._states)

    def states(self) -> list[np.ndarray]:
        return [s.state for s in self._states]

    def __repr__(self) -> str:
        return f"LabeledStateSet(n={len(self._states)})"


def restrict_window(tracks: TrackSet, j: int, k: int) -> TrackSet:
    """Restrict every track to the window [j, k], dropping emptied tracks."""
    if j > k:
        raise InvalidWindowError(f"window [{j}, {k}] has j > k")
    kept = []
    for t in tracks:
        r = t.restricted(j, k)
        if r is not None:
            kept.append(r)
    return TrackSet(kept)


def live_tracks(tracks: TrackSet, estimates_k: LabeledStateSet, j: int, k: int) -> TrackSet:
    """Tracks of `tracks` whose label is declared alive at scan k, windowed to [j, k].

    Labels present in `estimates_k` but absent from `tracks` are ignored.
    """
    if j > k:
        raise InvalidWindowError(f"window [{j}, {k}] has j > k")
    alive = set(estimates_k.labels())
    return restrict_window(TrackSet(t for t in tracks if t.label in alive), j, k)
