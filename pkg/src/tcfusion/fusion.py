"""Track consensus: matched-pair determination, matched-history bookkeeping,
two-node and multi-node kinematic consensus, and graph-based label consensus.

The per-node inputs are never modified by fusion: consensed estimates are
for reporting only and play no role in matching at later scans.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np

from .core import (
    ConsistencyError,
    GlobalLabel,
    InvalidWindowError,
    LabeledState,
    LabeledStateSet,
    Track,
    TrackSet,
    position_of,
)
from .assignment import optimal_assignment
from .kernels import pairwise_track_cost
from .metrics import WassersteinParams, wasserstein_track_distance

TrackDistance = Callable[[Track, Track], float]


# ---------------------------------------------------------------------------
# Types


@dataclass(frozen=True)
class MatchedPairs:
    """Optimal track pairing filtered to pairs with cost strictly below c.

    Indices refer to positions in the two (label-ordered) track sets the
    pairing was computed from.
    """

    pairs: tuple[tuple[int, int], ...]
    costs: tuple[float, ...]

    def row_indices(self) -> set[int]:
        return {m for m, _ in self.pairs}

    def col_indices(self) -> set[int]:
        return {n for _, n in self.pairs}

    def __len__(self) -> int:
        return len(self.pairs)


@dataclass(frozen=True)
class MatchedHistory:
    """Count matrix of match instances between two nodes' cumulative labels.

    Rows follow the fusing node's label space, columns the peer's. Label
    spaces only ever grow; the matrix is re-grown on update with old counts
    preserved in the top-left block.
    """

    row_labels: tuple[GlobalLabel, ...]
    col_labels: tuple[GlobalLabel, ...]
    counts: np.ndarray  # int64, len(row_labels) x len(col_labels)

    @staticmethod
    def empty() -> "MatchedHistory":
        return MatchedHistory((), (), np.zeros((0, 0), dtype=np.int64))


@dataclass(frozen=True)
class FusionConfig:
    """Knobs of the track-consensus fusion step.

    weights maps an ordered node pair (a, b) to the peer's fusing weight
    w(a,b); the node performing the fusion gets 1 - w(a,b). When a pair is
    missing the split defaults to 1/2 each.
    """

    window_length: int = 5
    c: float = 100.0
    p: int = 1
    clen: int = 2
    weights: Mapping[tuple[int, int], float] | None = None
    method: str = "tc-ospa2"  # tc-ospa2 | tc-wass
    alpha: float = 20.0  # time-embedding weight for tc-wass
    label_consensus: bool = True
    peer_mode: str = "all"  # all | neighbors
    min_match_count: int = 1
    label_mode: str = "component"  # component | one-hop

    def __post_init__(self) -> None:
        if self.window_length < 1:
            raise ValueError("window_length must be >= 1")
        if self.clen < 1:
            raise ValueError("clen must be >= 1")
        if self.method not in ("tc-ospa2", "tc-wass"):
            raise ValueError(f"unknown fusion method {self.method!r}")
        if self.peer_mode not in ("all", "neighbors"):
            raise ValueError(f"unknown peer_mode {self.peer_mode!r}")
        if self.label_mode not in ("component", "one-hop"):
            raise ValueError(f"unknown label_mode {self.label_mode!r}")
        if self.weights is not None:
            for pair, w in self.weights.items():
                if not 0.0 < float(w) < 1.0:
                    raise ValueError(f"weight for pair {pair} must be in (0, 1), got {w}")

    def pair_weights(self, a: int, b: int) -> tuple[float, float]:
        """Fusing weights (w_a, w_b) for node a fusing with peer b; sums to 1."""
        if self.weights is None:
            return 0.5, 0.5
        w_ab = self.weights.get((a, b))
        if w_ab is None:
            return 0.5, 0.5
        w_ab = float(w_ab)
        return 1.0 - w_ab, w_ab

    def track_distance(self) -> TrackDistance:
        if self.method == "tc-wass":
            params = WassersteinParams(p=self.p, alpha=self.alpha)
            return lambda t, u: wasserstein_track_distance(t, u, params)
        c = self.c
        from .metrics import ospa_track_distance

        return lambda t, u: ospa_track_distance(t, u, c)


@dataclass(frozen=True)
class LabelGraph:
    """Undirected graph over global labels with edges where match counts
    reached the threshold; edges only ever connect labels of different nodes."""

    vertices: frozenset[GlobalLabel]
    adjacency: Mapping[GlobalLabel, frozenset[GlobalLabel]]

    def component(self, label: GlobalLabel) -> set[GlobalLabel]:
        if label not in self.vertices:
            return {label}
        seen = {label}
        stack = [label]
        while stack:
            cur = stack.pop()
            for nxt in self.adjacency.get(cur, ()):
                if nxt not in seen:
                    seen.add(nxt)
                    stack.append(nxt)
        return seen

    def neighborhood(self, label: GlobalLabel) -> set[GlobalLabel]:
        return {label} | set(self.adjacency.get(label, ()))


# ---------------------------------------------------------------------------
# Matching


def _window_arrays(tracks: Sequence[Track], lo: int, hi: int):
    """Dense (mask, positions) window arrays for the fast cost kernel."""
    W = hi - lo + 1
    M = len(tracks)
    mask = np.zeros((M, W), dtype=np.uint8)
    pos = np.zeros((M, W, 2), dtype=np.float64)
    for m, t in enumerate(tracks):
        for k, x in t.items():
            w = k - lo
            if 0 <= w < W:
                mask[m, w] = 1
                pos[m, w] = position_of(x)
    return mask, pos


def track_cost_matrix(
    Ta: TrackSet,
    Tb: TrackSet,
    c: float,
    track_distance: TrackDistance | None = None,
) -> np.ndarray:
    """Pairwise track-to-track costs between two track sets.

    With the default distance this runs through the compiled kernel; a
    custom distance (e.g. the Wasserstein variant) is evaluated pairwise.
    """
    ta, tb = list(Ta), list(Tb)
    if track_distance is not None:
        return np.array([[track_distance(t, u) for u in tb] for t in ta], dtype=float)
    scans = [k for t in ta for k in t.domain] + [k for u in tb for k in u.domain]
    lo, hi = min(scans), max(scans)
    mask_a, pos_a = _window_arrays(ta, lo, hi)
    mask_b, pos_b = _window_arrays(tb, lo, hi)
    return pairwise_track_cost(mask_a, pos_a, mask_b, pos_b, c)


def determine_matched_pairs(
    Ta: TrackSet,
    Tb: TrackSet,
    c: float,
    track_distance: TrackDistance | None = None,
) -> MatchedPairs:
    """Optimal assignment between two track sets, keeping pairs with cost < c.

    The strict inequality means tracks with fully disjoint window domains
    (cost exactly c) are never considered matched, even though the
    assignment itself pairs them.
    """
    if len(Ta) == 0 or len(Tb) == 0:
        return MatchedPairs((), ())
    C = track_cost_matrix(Ta, Tb, c, track_distance)
    assignment = optimal_assignment(C)
    pairs = []
    costs = []
    for m in sorted(assignment.pairs):
        n = assignment.pairs[m]
        if C[m, n] < c:
            pairs.append((m, n))
            costs.append(float(C[m, n]))
    return MatchedPairs(tuple(pairs), tuple(costs))


def update_matched_history(
    prev: MatchedHistory,
    La: Sequence[GlobalLabel],
    Lb: Sequence[GlobalLabel],
    Q: MatchedPairs,
    current_a: TrackSet,
    current_b: TrackSet,
) -> MatchedHistory:
    """Grow the count matrix to the extended label spaces and add this scan's
    matches. La/Lb must extend the previous row/column label lists."""
    La = tuple(La)
    Lb = tuple(Lb)
    if La[: len(prev.row_labels)] != prev.row_labels:
        raise ConsistencyError("row label space does not extend the previous one")
    if Lb[: len(prev.col_labels)] != prev.col_labels:
        raise ConsistencyError("column label space does not extend the previous one")
    counts = np.zeros((len(La), len(Lb)), dtype=np.int64)
    r, s = prev.counts.shape
    counts[:r, :s] = prev.counts
    row_index = {lab: i for i, lab in enumerate(La)}
    col_index = {lab: i for i, lab in enumerate(Lb)}
    tracks_a = list(current_a)
    tracks_b = list(current_b)
    for m, n in Q.pairs:
        lab_a = tracks_a[m].label
        lab_b = tracks_b[n].label
        try:
            counts[row_index[lab_a], col_index[lab_b]] += 1
        except KeyError as exc:
            raise ConsistencyError(f"matched label {exc} missing from label space") from exc
    return MatchedHistory(La, Lb, counts)


# ---------------------------------------------------------------------------
# Two-node fusion


def _extend_labels(
    existing: Sequence[GlobalLabel], tracks: TrackSet
) -> tuple[GlobalLabel, ...]:
    known = set(existing)
    out = list(existing)
    for t in tracks:
        if t.label not in known:
            out.append(t.label)
            known.add(t.label)
    return tuple(out)


def _state_at_or_latest(t: Track, k: int) -> np.ndarray:
    """Scan-k state, or the most recent earlier in-window sample for
    fragmented tracks that miss scan k."""
    if k in t:
        return t.state_at(k)
    x = t.latest_at_or_before(k)
    if x is None:
        x = t.state_at(t.domain[0])
    return x


def fuse_two_nodes(
    Ta: TrackSet,
    Tb: TrackSet,
    hist: MatchedHistory | None,
    La: Sequence[GlobalLabel],
    Lb: Sequence[GlobalLabel],
    config: FusionConfig,
    node_pair: tuple[int, int],
    k: int,
    weights: tuple[float, float] | None = None,
    clen: int | None = None,
) -> tuple[LabeledStateSet, MatchedHistory | None, tuple[GlobalLabel, ...], tuple[GlobalLabel, ...]]:
    """One pairwise kinematic-consensus step at scan k, performed by node_pair[0].

    Returns the consensed labelled state estimates plus the updated matched
    history and cumulative label spaces. `hist=None` marks the history-free
    mode used when merging already-consensed sets (no bookkeeping).
    Inputs are never modified.
    """
    a, b = node_pair
    if weights is None:
        weights = config.pair_weights(a, b)
    w_a, w_b = weights
    if not (w_a > 0 and w_b > 0) or abs((w_a + w_b) - 1.0) > 1e-9:
        raise ValueError(f"fusing weights must be positive and sum to 1, got {weights}")
    if clen is None:
        clen = config.clen

    La2 = _extend_labels(La, Ta)
    Lb2 = _extend_labels(Lb, Tb)

    distance = None if config.method == "tc-ospa2" else config.track_distance()
    Q = determine_matched_pairs(Ta, Tb, config.c, distance)

    hist2 = hist
    if hist is not None:
        hist2 = update_matched_history(hist, La2, Lb2, Q, Ta, Tb)

    tracks_a = list(Ta)
    tracks_b = list(Tb)

    fused: dict[GlobalLabel, LabeledState] = {}
    for m, n in Q.pairs:
        xa = _state_at_or_latest(tracks_a[m], k)
        xb = _state_at_or_latest(tracks_b[n], k)
        x = w_a * xa + w_b * xb
        label = tracks_a[m].label  # fused label comes from the fusing node's side
        fused.setdefault(label, LabeledState(x, label))

    matched_rows = Q.row_indices()
    matched_cols = Q.col_indices()
    for m, t in enumerate(tracks_a):
        if m not in matched_rows and len(t) >= clen:
            fused.setdefault(t.label, LabeledState(_state_at_or_latest(t, k), t.label))
    for n, u in enumerate(tracks_b):
        if n not in matched_cols and len(u) >= clen:
            fused.setdefault(u.label, LabeledState(_state_at_or_latest(u, k), u.label))

    return LabeledStateSet(fused.values()), hist2, La2, Lb2


# ---------------------------------------------------------------------------
# Label consensus


def build_label_graph(
    all_hist: Mapping[tuple[int, int], MatchedHistory],
    all_labels: Mapping[int, Sequence[GlobalLabel]],
    min_count: int = 1,
) -> LabelGraph:
    """Graph over all cumulative labels with an edge wherever a pair's match
    count reached min_count."""
    vertices: set[GlobalLabel] = set()
    for labels in all_labels.values():
        vertices.update(labels)
    adjacency: dict[GlobalLabel, set[GlobalLabel]] = {}
    for hist in all_hist.values():
        if hist.counts.size == 0:
            continue
        rows, cols = np.nonzero(hist.counts >= min_count)
        for i, j in zip(rows, cols):
            lab_i = hist.row_labels[i]
            lab_j = hist.col_labels[j]
            vertices.add(lab_i)
            vertices.add(lab_j)
            adjacency.setdefault(lab_i, set()).add(lab_j)
            adjacency.setdefault(lab_j, set()).add(lab_i)
    return LabelGraph(
        frozenset(vertices),
        {k: frozenset(v) for k, v in adjacency.items()},
    )


def update_labels(
    labels_in: Sequence[GlobalLabel],
    all_hist: Mapping[tuple[int, int], MatchedHistory],
    all_labels: Mapping[int, Sequence[GlobalLabel]],
    min_count: int = 1,
    mode: str = "component",
) -> list[GlobalLabel]:
    """Rewrite consensed labels to the least connected label.

    For each label, candidates are its whole connected component in the
    match graph (or, in "one-hop" mode, the label and its direct
    neighbours), scanned in ascending label order. A candidate already
    carried by a *different* estimate in the list is skipped so labels
    stay unique; an estimate's own current label never blocks itself.
    Deterministic and idempotent for a fixed graph.
    """
    graph = build_label_graph(all_hist, all_labels, min_count)
    out = list(labels_in)
    for i, label in enumerate(out):
        if mode == "one-hop":
            connected = graph.neighborhood(label)
        else:
            connected = graph.component(label)
        others = {lab for j, lab in enumerate(out) if j != i}
        for candidate in sorted(connected, key=GlobalLabel.sort_key):
            if candidate not in others:
                out[i] = candidate
                break
    return out


# ---------------------------------------------------------------------------
# Multi-node fusion


def states_as_tracks(X: LabeledStateSet, k: int) -> TrackSet:
    """Lift a single-scan labelled state set to a set of length-1 tracks."""
    return TrackSet(Track(s.label, {k: s.state}) for s in X)


def passthrough_estimates(Ta: TrackSet, k: int) -> LabeledStateSet:
    """A node's own scan-k estimates, used when it has no fusion peers."""
    return LabeledStateSet(
        LabeledState(_state_at_or_latest(t, k), t.label) for t in Ta
    )


def fuse_multi_nodes(
    all_tracks: Mapping[int, TrackSet],
    all_hist: Mapping[tuple[int, int], MatchedHistory],
    all_labels: Mapping[int, Sequence[GlobalLabel]],
    config: FusionConfig,
    topology: Mapping[int, Iterable[int]],
    k: int,
) -> tuple[dict[int, LabeledStateSet], dict[tuple[int, int], MatchedHistory], dict[int, tuple[GlobalLabel, ...]], dict[int, float]]:
    """Pairwise-sequential kinematic consensus followed by label consensus,
    run for every node at scan k.

    all_tracks holds each node's live tracks already restricted to the
    fusion window. Step 1 fuses each peer with the node under the track
    length threshold; step 2 merges the per-peer consensed sets with the
    threshold dropped to 1 so nothing confirmed is lost. Local inputs are
    left untouched (no feedback). Also returns per-node wall time spent
    fusing.
    """
    nodes = sorted(all_tracks)
    hist_out: dict[tuple[int, int], MatchedHistory] = dict(all_hist)
    labels_out: dict[int, tuple[GlobalLabel, ...]] = {
        n: tuple(all_labels.get(n, ())) for n in nodes
    }
    consensed: dict[int, LabeledStateSet] = {}
    elapsed: dict[int, float] = {}

    for a in nodes:
        t0 = time.perf_counter()
        if config.peer_mode == "neighbors":
            peers = sorted(set(topology.get(a, ())) & set(nodes) - {a})
        else:
            peers = [n for n in nodes if n != a]

        if not peers:
            result = passthrough_estimates(all_tracks[a], k)
        else:
            temps: list[LabeledStateSet] = []
            for b in peers:
                hist_ab = hist_out.get((a, b), MatchedHistory.empty())
                X_t, hist_ab2, La2, Lb2 = fuse_two_nodes(
                    all_tracks[a],
                    all_tracks[b],
                    hist_ab,
                    labels_out[a],
                    labels_out[b],
                    config,
                    (a, b),
                    k,
                )
                hist_out[(a, b)] = hist_ab2
                labels_out[a] = La2
                labels_out[b] = Lb2
                temps.append(X_t)

            result = temps[0]
            for X_t in temps[1:]:
                result, _, _, _ = fuse_two_nodes(
                    states_as_tracks(result, k),
                    states_as_tracks(X_t, k),
                    None,
                    (),
                    (),
                    config,
                    (a, a),
                    k,
                    weights=(0.5, 0.5),
                    clen=1,
                )

        if config.label_consensus:
            new_labels = update_labels(
                result.labels(),
                hist_out,
                labels_out,
                min_count=config.min_match_count,
                mode=config.label_mode,
            )
            result = LabeledStateSet(
                LabeledState(s.state, lab) for s, lab in zip(result, new_labels)
            )
        consensed[a] = result
        elapsed[a] = time.perf_counter() - t0

    return consensed, hist_out, labels_out, elapsed


# ---------------------------------------------------------------------------
# Weights and bounds


def metropolis_weights(
    topology: Mapping[int, Iterable[int]]
) -> dict[tuple[int, int], Fraction]:
    """Metropolis consensus weights as exact rationals.

    Cross weights are 1 / (1 + max of the two degrees); the self weight
    absorbs the remainder so each node's weights sum to exactly 1.
    """
    neighbors = {a: {b for b in bs if b != a} for a, bs in topology.items()}
    weights: dict[tuple[int, int], Fraction] = {}
    for a, bs in neighbors.items():
        total = Fraction(0)
        for b in sorted(bs):
            w = Fraction(1, 1 + max(len(neighbors[a]), len(neighbors.get(b, ()))))
            weights[(a, b)] = w
            total += w
        weights[(a, a)] = 1 - total
    return weights


def empirical_existence_probability(track, j: int, k: int) -> float:
    """Fraction of the window [j, k] during which the track exists.

    Accepts a Track or a bare iterable of scan indices (handy for the
    empty-domain case, which a Track cannot represent).
    """
    if j > k:
        raise InvalidWindowError(f"window [{j}, {k}] has j > k")
    domain = tuple(track.domain) if isinstance(track, Track) else tuple(track)
    if any(s < j or s > k for s in domain):
        raise ValueError(f"track domain {domain} not contained in [{j}, {k}]")
    return len(domain) / (k - j + 1)


@dataclass(frozen=True)
class ConsistencyMargin:
    error_bound: float  # eps * P + c * (1 - P)
    separation_threshold: float  # 4 * error_bound


def label_consistency_margin(epsilon: float, P: float, c: float) -> ConsistencyMargin:
    """Track-to-track error bound and the trajectory separation needed for
    label consistency to be guaranteed."""
    if not 0.0 <= P <= 1.0:
        raise ValueError(f"P must be in [0, 1], got {P}")
    if c <= 0:
        raise ValueError(f"cut-off must be > 0, got {c}")
    if epsilon < 0 or epsilon > c:
        raise ValueError(f"per-scan error bound must be in [0, c], got {epsilon}")
    bound = epsilon * P + c * (1.0 - P)
    return ConsistencyMargin(bound, 4.0 * bound)
