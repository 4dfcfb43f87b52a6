"""Multi-object distances: OSPA, the OSPA track-to-track distance, OSPA(2),
and the Wasserstein baseline.

Point distances default to Euclidean distance on position components only
(velocities never enter any reported distance; see core.position_of).
All functions are pure and re-entrant.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Iterable, Sequence

import numpy as np

from .assignment import min_cost_transport, optimal_assignment
from .core import Track, TrackSet, UndefinedDistanceError, position_of

PointDistance = Callable[[np.ndarray, np.ndarray], float]


@dataclass(frozen=True)
class OspaParams:
    p: int = 1
    c: float = 100.0

    def __post_init__(self) -> None:
        if self.p < 1:
            raise ValueError(f"order p must be >= 1, got {self.p}")
        if self.c <= 0:
            raise ValueError(f"cut-off c must be > 0, got {self.c}")


@dataclass(frozen=True)
class WassersteinParams:
    p: int = 1
    alpha: float = 20.0  # time-embedding weight, m/s

    def __post_init__(self) -> None:
        if self.p < 1:
            raise ValueError(f"order p must be >= 1, got {self.p}")
        if self.alpha < 0:
            raise ValueError(f"alpha must be >= 0, got {self.alpha}")


def euclidean(x: np.ndarray, y: np.ndarray) -> float:
    return float(np.linalg.norm(np.atleast_1d(x) - np.atleast_1d(y)))


def position_distance(x: np.ndarray, y: np.ndarray) -> float:
    """Euclidean distance between the position components of two states."""
    return euclidean(position_of(np.atleast_1d(x)), position_of(np.atleast_1d(y)))


def _as_points(X: Iterable) -> list[np.ndarray]:
    return [np.atleast_1d(np.asarray(x, dtype=float)) for x in X]


def _ospa_from_costs(capped: np.ndarray, p: int, c: float) -> float:
    """Finish the OSPA evaluation given the capped base-distance matrix (m <= n).

    The matched costs are summed in sorted order so the result is exactly
    symmetric in the two arguments (equal-size inputs would otherwise sum
    the same terms in different orders).
    """
    m, n = capped.shape
    powered = capped**p
    assignment = optimal_assignment(powered)
    matched = sorted(powered[i, j] for i, j in assignment.pairs.items())
    total = math.fsum(matched) + c**p * (n - m)
    return float((total / n) ** (1.0 / p))


def ospa(
    X: Iterable,
    Y: Iterable,
    params: OspaParams = OspaParams(),
    base: PointDistance = position_distance,
) -> float:
    """OSPA distance between two finite point sets.

    Conventions: 0 for two empty sets, c when exactly one is empty; the
    roles of X and Y swap when |X| > |Y|. The result is in [0, c].
    """
    xs, ys = _as_points(X), _as_points(Y)
    if not xs and not ys:
        return 0.0
    if not xs or not ys:
        return float(params.c)
    if len(xs) > len(ys):
        xs, ys = ys, xs
    c = params.c
    capped = np.array([[min(base(x, y), c) for y in ys] for x in xs])
    return _ospa_from_costs(capped, params.p, c)


def ospa_track_distance(
    t: Track,
    u: Track,
    c: float,
    base: PointDistance = position_distance,
) -> float:
    """Time-averaged single-scan OSPA between two tracks.

    Averages over the union of the two domains: the capped base distance
    where both tracks exist, the cut-off c where exactly one does. Callers
    compare tracks restricted to a common window.
    """
    union = sorted(set(t.domain) | set(u.domain))
    if not union:
        return 0.0
    total = 0.0
    for k in union:
        if k in t and k in u:
            total += min(c, base(t.state_at(k), u.state_at(k)))
        else:
            total += c
    return total / len(union)


def ospa2(
    Ta: TrackSet,
    Tb: TrackSet,
    params: OspaParams = OspaParams(),
    base: PointDistance = position_distance,
) -> float:
    """OSPA over sets of tracks with the track-to-track distance as base.

    Depends only on the unlabelled tracks; labels play no role here (they
    matter indirectly, through how estimates were grouped into tracks).
    """
    ta, tb = list(Ta), list(Tb)
    if not ta and not tb:
        return 0.0
    if not ta or not tb:
        return float(params.c)
    if len(ta) > len(tb):
        ta, tb = tb, ta
    c = params.c
    capped = np.array([[ospa_track_distance(t, u, c, base) for u in tb] for t in ta])
    return _ospa_from_costs(capped, params.p, c)


def wasserstein(
    X: Iterable,
    Y: Iterable,
    params: WassersteinParams = WassersteinParams(),
    base: PointDistance = euclidean,
    solver: str = "lap",
) -> float:
    """Wasserstein distance of order p between two non-empty point sets.

    Solved exactly as a balanced transportation problem with row sums 1/m
    and column sums 1/n. Undefined (raises) if either set is empty.
    """
    xs, ys = _as_points(X), _as_points(Y)
    if not xs or not ys:
        raise UndefinedDistanceError("Wasserstein distance is undefined for empty sets")
    D = np.array([[base(x, y) ** params.p for y in ys] for x in xs])
    plan = min_cost_transport(D, solver=solver)
    return float(plan.cost ** (1.0 / params.p))


def time_embedded_points(t: Track, alpha: float) -> list[np.ndarray]:
    """Track samples as (position, alpha * scan) points."""
    return [
        np.concatenate([position_of(t.state_at(k)), [alpha * k]]) for k in t.domain
    ]


def wasserstein_track_distance(
    t: Track,
    u: Track,
    params: WassersteinParams = WassersteinParams(),
) -> float:
    """Wasserstein distance between tracks with time embedded as a coordinate.

    Each sample becomes (position, alpha * scan); the base distance is
    Euclidean on the augmented coordinates. Defined even for fragmented
    tracks, unlike a per-scan time average.
    """
    return wasserstein(
        time_embedded_points(t, params.alpha),
        time_embedded_points(u, params.alpha),
        params,
        base=euclidean,
    )


def positions_at(tracks: TrackSet, k: int) -> list[np.ndarray]:
    """Positions of all tracks that have a sample at scan k."""
    return [position_of(t.state_at(k)) for t in tracks if k in t]
