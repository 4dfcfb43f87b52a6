import itertools
from fractions import Fraction

import numpy as np
import pytest

from tcfusion.core import ConsistencyError, LabeledState, LabeledStateSet, TrackSet, label_of
from tcfusion.fusion import (
    FusionConfig,
    MatchedHistory,
    MatchedPairs,
    build_label_graph,
    determine_matched_pairs,
    empirical_existence_probability,
    fuse_multi_nodes,
    fuse_two_nodes,
    label_consistency_margin,
    metropolis_weights,
    states_as_tracks,
    update_labels,
    update_matched_history,
)
from tcfusion.io import serialize_tracksets
from tcfusion.metrics import ospa_track_distance

from conftest import line_track, make_track


def history_for(pairs_counts, La, Lb):
    counts = np.zeros((len(La), len(Lb)), dtype=np.int64)
    for (i, j), v in pairs_counts.items():
        counts[i, j] = v
    return MatchedHistory(tuple(La), tuple(Lb), counts)


# ---------------------------------------------------------------------------
# determine_matched_pairs


def test_matched_pairs_empty_inputs():
    t = TrackSet([make_track(1, 1, 1, {1: (0, 0)})])
    assert len(determine_matched_pairs(TrackSet(), t, 100.0)) == 0
    assert len(determine_matched_pairs(t, TrackSet(), 100.0)) == 0


def test_matched_pairs_with_outlier():
    # Two coincident pairs plus one distant extra track on node b.
    ta = [
        line_track(1, 1, 1, (0, 0), (1, 0), range(1, 6)),
        line_track(1, 2, 1, (500, 500), (0, 1), range(1, 6)),
    ]
    tb = [
        line_track(1, 1, 2, (1, 0), (1, 0), range(1, 6)),
        line_track(1, 2, 2, (501, 500), (0, 1), range(1, 6)),
        line_track(1, 3, 2, (5000, 5000), (0, 0), range(1, 6)),
    ]
    Ta, Tb = TrackSet(ta), TrackSet(tb)
    got = determine_matched_pairs(Ta, Tb, 100.0)
    # Oracle: brute-force matching over all injections on the cost matrix.
    D = [[ospa_track_distance(t, u, 100.0) for u in Tb] for t in Ta]
    best = min(
        (sum(D[i][p[i]] for i in range(2)), p) for p in itertools.permutations(range(3), 2)
    )[1]
    assert set(got.pairs) == {(i, best[i]) for i in range(2)}
    assert all(c < 100.0 for c in got.costs)


def test_matched_pairs_all_at_cutoff_unmatched():
    # Disjoint-domain tracks: every pairwise cost equals c, so no pair
    # survives the strict filter even though an assignment exists.
    ta = [make_track(1, 1, 1, {1: (0, 0), 2: (0, 0)})]
    tb = [make_track(1, 1, 2, {3: (0, 0), 4: (0, 0)})]
    got = determine_matched_pairs(TrackSet(ta), TrackSet(tb), 100.0)
    assert len(got) == 0


# ---------------------------------------------------------------------------
# update_matched_history


def la(*specs):
    return tuple(label_of(b, i, n) for b, i, n in specs)


def test_history_growth_preserves_counts():
    prev = history_for({(0, 0): 5}, la((1, 1, 1)), la((1, 1, 2)))
    La = la((1, 1, 1), (3, 1, 1))
    Lb = la((1, 1, 2), (3, 1, 2))
    out = update_matched_history(
        prev, La, Lb, MatchedPairs((), ()), TrackSet(), TrackSet()
    )
    assert out.counts.shape == (2, 2)
    assert out.counts[0, 0] == 5
    assert out.counts.sum() == 5


def test_history_accumulates_matches():
    ta = TrackSet([make_track(1, 1, 1, {1: (0, 0)})])
    tb = TrackSet([make_track(1, 1, 2, {1: (0, 0)})])
    hist = MatchedHistory.empty()
    La, Lb = la((1, 1, 1)), la((1, 1, 2))
    q = MatchedPairs(((0, 0),), (0.0,))
    for _ in range(5):
        hist = update_matched_history(hist, La, Lb, q, ta, tb)
    assert hist.counts[0, 0] == 5


def test_history_label_must_extend():
    prev = history_for({}, la((1, 1, 1)), la((1, 1, 2)))
    with pytest.raises(ConsistencyError):
        update_matched_history(
            prev, la((2, 1, 1)), la((1, 1, 2)), MatchedPairs((), ()), TrackSet(), TrackSet()
        )


def test_history_unknown_matched_label_errors():
    ta = TrackSet([make_track(9, 9, 1, {1: (0, 0)})])
    tb = TrackSet([make_track(1, 1, 2, {1: (0, 0)})])
    with pytest.raises(ConsistencyError):
        update_matched_history(
            MatchedHistory.empty(),
            la((1, 1, 1)),
            la((1, 1, 2)),
            MatchedPairs(((0, 0),), (0.0,)),
            ta,
            tb,
        )


# ---------------------------------------------------------------------------
# fuse_two_nodes


CFG = FusionConfig(window_length=5, c=100.0, p=1, clen=2)


def test_fuse_identical_sets_returns_common_states():
    ta = [line_track(1, 1, 1, (10, 20), (1, 1), range(1, 6))]
    tb = [line_track(1, 1, 2, (10, 20), (1, 1), range(1, 6))]
    X, hist, La, Lb = fuse_two_nodes(
        TrackSet(ta), TrackSet(tb), MatchedHistory.empty(), (), (), CFG, (1, 2), 5,
        weights=(0.5, 0.5),
    )
    assert len(X) == 1
    est = next(iter(X))
    assert np.allclose(est.state, ta[0].state_at(5))
    assert est.label == ta[0].label  # fusing node's label


def test_fuse_midpoint():
    ta = [make_track(1, 1, 1, {k: (0.0, 0.0) for k in range(1, 6)})]
    tb = [make_track(1, 1, 2, {k: (10.0, 0.0) for k in range(1, 6)})]
    X, *_ = fuse_two_nodes(
        TrackSet(ta), TrackSet(tb), MatchedHistory.empty(), (), (), CFG, (1, 2), 5,
        weights=(0.5, 0.5),
    )
    assert np.allclose(next(iter(X)).state, [5.0, 0.0])


def test_fuse_retains_long_exclusive_track():
    shared = [
        (line_track(1, i, 1, (i * 300, 0), (1, 0), range(1, 6)),
         line_track(1, i, 2, (i * 300, 1), (1, 0), range(1, 6)))
        for i in (1, 2)
    ]
    ta = [p[0] for p in shared]
    tb = [p[1] for p in shared] + [line_track(3, 3, 2, (900, 900), (0, 1), range(3, 6))]
    X, *_ = fuse_two_nodes(
        TrackSet(ta), TrackSet(tb), MatchedHistory.empty(), (), (), CFG, (1, 2), 5,
        weights=(0.5, 0.5),
    )
    assert len(X) == 3  # 2 fused pairs + 1 retained exclusive (length 3 >= 2)


def test_fuse_discards_short_exclusive_track():
    shared = [
        (line_track(1, i, 1, (i * 300, 0), (1, 0), range(1, 6)),
         line_track(1, i, 2, (i * 300, 1), (1, 0), range(1, 6)))
        for i in (1, 2)
    ]
    ta = [p[0] for p in shared]
    tb = [p[1] for p in shared] + [make_track(5, 3, 2, {5: (900.0, 900.0)})]
    X, *_ = fuse_two_nodes(
        TrackSet(ta), TrackSet(tb), MatchedHistory.empty(), (), (), CFG, (1, 2), 5,
        weights=(0.5, 0.5),
    )
    assert len(X) == 2  # exclusive track length 1 < clen=2 dropped


def test_fuse_extends_label_spaces_and_history():
    ta = [line_track(2, 1, 1, (0, 0), (1, 0), range(2, 6))]
    tb = [line_track(3, 1, 2, (0, 1), (1, 0), range(3, 6))]
    X, hist, La, Lb = fuse_two_nodes(
        TrackSet(ta), TrackSet(tb), MatchedHistory.empty(), (), (), CFG, (1, 2), 5,
        weights=(0.5, 0.5),
    )
    assert La == (label_of(2, 1, 1),)
    assert Lb == (label_of(3, 1, 2),)
    assert hist.counts.shape == (1, 1)
    assert hist.counts[0, 0] == 1


def test_fuse_inputs_not_modified():
    ta = TrackSet([line_track(1, 1, 1, (0, 0), (1, 0), range(1, 6))])
    tb = TrackSet([line_track(1, 1, 2, (0, 1), (1, 0), range(1, 6))])
    before = serialize_tracksets({1: ta, 2: tb})
    fuse_two_nodes(ta, tb, MatchedHistory.empty(), (), (), CFG, (1, 2), 5, weights=(0.5, 0.5))
    assert serialize_tracksets({1: ta, 2: tb}) == before


def test_fused_states_are_convex_combinations(rng):
    for _ in range(50):
        w = float(rng.uniform(0.1, 0.9))
        pa = rng.random(2) * 100
        pb = pa + rng.standard_normal(2) * 15  # within the matching cut-off
        ta = [make_track(1, 1, 1, {k: pa for k in range(1, 6)})]
        tb = [make_track(1, 1, 2, {k: pb for k in range(1, 6)})]
        X, *_ = fuse_two_nodes(
            TrackSet(ta), TrackSet(tb), None, (), (), CFG, (1, 2), 5, weights=(w, 1 - w)
        )
        got = next(iter(X)).state
        assert np.allclose(got, w * pa + (1 - w) * pb)
        # On the segment between parents.
        seg = (got - pa) @ (pb - pa) / max((pb - pa) @ (pb - pa), 1e-12)
        assert -1e-9 <= seg <= 1 + 1e-9


def test_fuse_labels_always_unique(rng):
    for _ in range(30):
        ta, tb = [], []
        for i in range(int(rng.integers(0, 4))):
            scans = range(1, int(rng.integers(2, 6)))
            ta.append(make_track(1, i + 1, 1, {k: rng.random(2) * 400 for k in scans}))
        for i in range(int(rng.integers(0, 4))):
            scans = range(1, int(rng.integers(2, 6)))
            tb.append(make_track(1, i + 1, 2, {k: rng.random(2) * 400 for k in scans}))
        X, *_ = fuse_two_nodes(
            TrackSet(ta), TrackSet(tb), MatchedHistory.empty(), (), (), CFG, (1, 2), 5,
            weights=(0.5, 0.5),
        )
        labels = X.labels()
        assert len(labels) == len(set(labels))


# ---------------------------------------------------------------------------
# update_labels / label graph


def test_update_labels_empty_graph_unchanged():
    labels = [label_of(1, 1, 1), label_of(2, 1, 2)]
    out = update_labels(labels, {}, {1: la((1, 1, 1)), 2: la((2, 1, 2))})
    assert out == labels


def test_update_labels_handoff_takes_earlier_label():
    # Node 1's label (earlier birth) and node 2's label linked by history:
    # both map to node 1's label.
    l1, l2 = label_of(1, 1, 1), label_of(10, 1, 2)
    hist = {(1, 2): history_for({(0, 0): 7}, [l1], [l2])}
    labels_by_node = {1: (l1,), 2: (l2,)}
    assert update_labels([l2], hist, labels_by_node) == [l1]
    assert update_labels([l1], hist, labels_by_node) == [l1]


def test_update_labels_uniqueness_takes_next_least():
    # Two estimates in one linked component: the first keeps the least
    # label, the second falls back to the next-least.
    l1, l2 = label_of(1, 1, 1), label_of(5, 1, 2)
    hist = {(1, 2): history_for({(0, 0): 3}, [l1], [l2])}
    labels_by_node = {1: (l1,), 2: (l2,)}
    out = update_labels([l1, l2], hist, labels_by_node)
    assert out == [l1, l2]
    out = update_labels([l2, l1], hist, labels_by_node)
    assert sorted(out, key=lambda l: l.sort_key()) == [l1, l2]
    assert len(set(out)) == 2


def test_update_labels_min_count_damps_single_matches():
    l1, l2 = label_of(1, 1, 1), label_of(10, 1, 2)
    hist = {(1, 2): history_for({(0, 0): 1}, [l1], [l2])}
    labels_by_node = {1: (l1,), 2: (l2,)}
    assert update_labels([l2], hist, labels_by_node, min_count=2) == [l2]
    assert update_labels([l2], hist, labels_by_node, min_count=1) == [l1]


def test_update_labels_one_hop_mode():
    # Chain l3 - l2 - l1: component-wide takes l1, one-hop from l3 sees
    # only l2.
    l1, l2, l3 = label_of(1, 1, 1), label_of(5, 1, 2), label_of(9, 1, 3)
    hist = {
        (2, 1): history_for({(0, 0): 2}, [l2], [l1]),
        (3, 2): history_for({(0, 0): 2}, [l3], [l2]),
    }
    labels_by_node = {1: (l1,), 2: (l2,), 3: (l3,)}
    assert update_labels([l3], hist, labels_by_node, mode="component") == [l1]
    assert update_labels([l3], hist, labels_by_node, mode="one-hop") == [l2]


def test_update_labels_idempotent(rng):
    all_labels = {n: tuple(label_of(int(b), 1, n) for b in range(1, 6)) for n in (1, 2)}
    for _ in range(30):
        counts = rng.integers(0, 2, size=(5, 5))
        hist = {(1, 2): MatchedHistory(all_labels[1], all_labels[2], counts.astype(np.int64))}
        pool = list(all_labels[1] + all_labels[2])
        picks = rng.choice(len(pool), size=4, replace=False)
        labels = [pool[i] for i in picks]
        once = update_labels(labels, hist, all_labels)
        twice = update_labels(once, hist, all_labels)
        assert once == twice


def test_label_graph_edges_cross_nodes_only():
    l1, l2 = label_of(1, 1, 1), label_of(2, 1, 2)
    hist = {(1, 2): history_for({(0, 0): 1}, [l1], [l2])}
    g = build_label_graph(hist, {1: (l1,), 2: (l2,)})
    for a, nbrs in g.adjacency.items():
        for b in nbrs:
            assert a.node_id != b.node_id


# ---------------------------------------------------------------------------
# fuse_multi_nodes


def two_node_setup():
    ta = TrackSet([line_track(1, 1, 1, (0, 0), (1, 0), range(1, 6))])
    tb = TrackSet([line_track(2, 1, 2, (0, 1), (1, 0), range(2, 6))])
    return {1: ta, 2: tb}


def test_multi_node_reduces_to_two_node():
    tracks = two_node_setup()
    topo = {1: {2}, 2: {1}}
    cfg = FusionConfig(window_length=5, c=100.0, clen=2, weights={(1, 2): 0.5, (2, 1): 0.5})
    consensed, hist, labels, _ = fuse_multi_nodes(tracks, {}, {1: (), 2: ()}, cfg, topo, 5)

    X_direct, hist_ab, La, Lb = fuse_two_nodes(
        tracks[1], tracks[2], MatchedHistory.empty(), (), (), cfg, (1, 2), 5
    )
    rewritten = update_labels(X_direct.labels(), {(1, 2): hist_ab}, {1: La, 2: Lb})
    direct = LabeledStateSet(
        LabeledState(s.state, lab) for s, lab in zip(X_direct, rewritten)
    )
    assert consensed[1].labels() == direct.labels()
    assert all(
        np.allclose(a.state, b.state) for a, b in zip(consensed[1], direct)
    )


def test_multi_node_no_peers_passthrough():
    ta = TrackSet([line_track(1, 1, 1, (5, 5), (0, 0), range(1, 6))])
    cfg = FusionConfig()
    consensed, _, _, _ = fuse_multi_nodes({1: ta}, {}, {1: ()}, cfg, {1: set()}, 5)
    assert len(consensed[1]) == 1
    assert np.allclose(next(iter(consensed[1])).state, [5.0, 5.0])


def test_multi_node_propagates_exclusive_object():
    # Only node 3 sees the third object; it must appear everywhere.
    base = [
        (line_track(1, 1, n, (100, 100 + n), (1, 0), range(1, 6))) for n in (1, 2, 3)
    ]
    exclusive = line_track(1, 2, 3, (800, 800), (0, 1), range(1, 6))
    tracks = {
        1: TrackSet([base[0]]),
        2: TrackSet([base[1]]),
        3: TrackSet([base[2], exclusive]),
    }
    topo = {n: {1, 2, 3} - {n} for n in (1, 2, 3)}
    cfg = FusionConfig(window_length=5, clen=2)
    consensed, _, _, _ = fuse_multi_nodes(
        tracks, {}, {1: (), 2: (), 3: ()}, cfg, topo, 5
    )
    for n in (1, 2, 3):
        positions = [s.state for s in consensed[n]]
        assert any(np.linalg.norm(p - [800, 804]) < 50 for p in positions), n
        assert len(consensed[n]) == 2


def test_multi_node_does_not_modify_inputs():
    tracks = two_node_setup()
    before = serialize_tracksets(tracks)
    cfg = FusionConfig()
    fuse_multi_nodes(tracks, {}, {1: (), 2: ()}, cfg, {1: {2}, 2: {1}}, 5)
    assert serialize_tracksets(tracks) == before


def test_states_as_tracks_roundtrip():
    X = LabeledStateSet([LabeledState(np.array([1.0, 2.0]), label_of(1, 1, 1))])
    ts = states_as_tracks(X, 7)
    assert ts[0].domain == (7,)
    assert np.allclose(ts[0].state_at(7), [1.0, 2.0])


# ---------------------------------------------------------------------------
# weights and bounds


def test_metropolis_two_nodes():
    w = metropolis_weights({1: {2}, 2: {1}})
    assert w[(1, 2)] == Fraction(1, 2)
    assert w[(2, 1)] == Fraction(1, 2)
    assert w[(1, 1)] == Fraction(1, 2)


def test_metropolis_star():
    topo = {1: {2, 3, 4}, 2: {1}, 3: {1}, 4: {1}}
    w = metropolis_weights(topo)
    assert w[(1, 2)] == Fraction(1, 4)
    assert w[(2, 1)] == Fraction(1, 4)
    assert w[(1, 1)] == Fraction(1, 4)
    assert w[(2, 2)] == Fraction(3, 4)


def test_metropolis_isolated_node():
    w = metropolis_weights({1: set()})
    assert w[(1, 1)] == Fraction(1)


def test_metropolis_random_topologies(rng):
    for _ in range(50):
        n = int(rng.integers(1, 9))
        nodes = list(range(1, n + 1))
        topo = {a: set() for a in nodes}
        for a, b in itertools.combinations(nodes, 2):
            if rng.random() < 0.4:
                topo[a].add(b)
                topo[b].add(a)
        w = metropolis_weights(topo)
        for a in nodes:
            total = sum(v for (x, _), v in w.items() if x == a)
            assert total == 1  # exact rational arithmetic
        for a in nodes:
            for b in topo[a]:
                assert w[(a, b)] == w[(b, a)]


def test_existence_probability():
    t = make_track(1, 1, 1, {k: (0, 0) for k in range(3, 8)})
    assert empirical_existence_probability(t, 3, 7) == 1.0
    assert empirical_existence_probability([], 1, 10) == 0.0
    # Fig.-2-style fragmentation: 5 of 8 scans present.
    u = make_track(1, 1, 1, {k: (0, 0) for k in (1, 2, 3, 5, 8)})
    assert empirical_existence_probability(u, 1, 8) == pytest.approx(5 / 8)


def test_existence_probability_errors():
    t = make_track(1, 1, 1, {5: (0, 0)})
    with pytest.raises(ValueError):
        empirical_existence_probability(t, 1, 4)
    with pytest.raises(ValueError):
        empirical_existence_probability(t, 6, 5)


def test_consistency_margin_values():
    m = label_consistency_margin(10.0, 0.98, 100.0)
    assert m.error_bound == pytest.approx(11.8)
    assert m.separation_threshold == pytest.approx(47.2)
    assert label_consistency_margin(7.0, 1.0, 100.0).error_bound == pytest.approx(7.0)
    assert label_consistency_margin(7.0, 0.0, 100.0).error_bound == pytest.approx(100.0)


def test_consistency_margin_validation():
    with pytest.raises(ValueError):
        label_consistency_margin(120.0, 0.5, 100.0)
    with pytest.raises(ValueError):
        label_consistency_margin(10.0, 1.5, 100.0)


# ---------------------------------------------------------------------------
# Proposition-1-style identity matching (small version; the acceptance
# suite runs the full 200-trial experiment)


def perturbed_copies(rng, node, truths, eps, miss_scans):
    out = []
    for i, t in enumerate(truths):
        direction = rng.standard_normal(2)
        direction /= np.linalg.norm(direction)
        bias = direction * eps * rng.random()
        drop = set(rng.choice(sorted(t.domain), size=miss_scans, replace=False))
        samples = {k: t.state_at(k) + bias for k in t.domain if k not in drop}
        out.append(make_track(t.label.birth_time, i + 1, node, samples))
    return out


def test_separated_tracks_match_identity(rng):
    K = 50
    for _ in range(20):
        truths = [
            line_track(1, i + 1, 0, (0, 60.0 * i), (2, 0), range(1, K + 1)) for i in range(3)
        ]
        ta = perturbed_copies(rng, 1, truths, 10.0, 1)
        tb = perturbed_copies(rng, 2, truths, 10.0, 1)
        got = determine_matched_pairs(TrackSet(ta), TrackSet(tb), 100.0)
        assert set(got.pairs) == {(0, 0), (1, 1), (2, 2)}
