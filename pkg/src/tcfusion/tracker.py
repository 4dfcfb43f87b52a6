"""Per-node local tracker: Kalman prediction, gated global-nearest-neighbor
association, M-of-N confirmation, and miss-based deletion.

This is deliberately a plain GNN-Kalman tracker; the fusion layer is
agnostic to how the per-node tracks were produced and can equally ingest
externally generated track logs (see the CLI `fuse` subcommand).
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .assignment import optimal_assignment
from .core import LabeledState, LabeledStateSet, label_of
from .sim import MotionModel, SensorModel

# Measurement matrix for [px, vx, py, vy] -> [px, py].
H = np.array([[1.0, 0.0, 0.0, 0.0], [0.0, 0.0, 1.0, 0.0]])

# Chi-square quantiles, 2 dof: gates on squared Mahalanobis distance.
CHI2_GATE_99 = 9.21034
CHI2_GATE_975 = 7.37776

_BIG = 1e12


@dataclass(frozen=True)
class TrackerParams:
    """Confirmation is deliberately strict (5-of-6 with a tighter tentative
    gate): at 10 clutter points per scan, chained clutter otherwise
    confirms often enough to distort consensed cardinality."""

    gate: float = CHI2_GATE_99
    tentative_gate: float = CHI2_GATE_975
    confirm_hits: int = 5  # M hits out of the last confirm_window scans
    confirm_window: int = 6
    delete_misses: int = 4  # consecutive misses before a confirmed track dies
    tentative_misses: int = 2  # consecutive misses before a tentative dies
    init_vel_std: float = 20.0


@dataclass
class LocalTrack:
    """Internal Kalman track; status moves tentative -> confirmed -> dead."""

    birth_time: int
    birth_index: int
    x: np.ndarray
    P: np.ndarray
    hits: tuple[bool, ...] = ()
    misses: int = 0
    confirmed: bool = False
    updated: bool = False  # received a measurement at the current scan

    def copy(self) -> "LocalTrack":
        return replace(self, x=self.x.copy(), P=self.P.copy())


def _new_track(z: np.ndarray, k: int, index: int, sensor: SensorModel, params: TrackerParams) -> LocalTrack:
    x = np.array([z[0], 0.0, z[1], 0.0])
    P = np.diag(
        [
            sensor.noise_std[0] ** 2,
            params.init_vel_std**2,
            sensor.noise_std[1] ** 2,
            params.init_vel_std**2,
        ]
    )
    return LocalTrack(birth_time=k, birth_index=index, x=x, P=P, hits=(True,), updated=True)


def _innovation_cov(P: np.ndarray, R: np.ndarray) -> np.ndarray:
    return H @ P @ H.T + R + 1e-12 * np.eye(2)


def _mahalanobis_sq(residual: np.ndarray, S: np.ndarray) -> float:
    return float(residual @ np.linalg.solve(S, residual))


def associate(cost: np.ndarray, gate: float) -> dict[int, int]:
    """Global-nearest-neighbor assignment of tracks (rows) to measurements
    (columns); pairs whose cost exceeds the gate are dropped."""
    if cost.size == 0:
        return {}
    result = optimal_assignment(cost)
    return {i: j for i, j in result.pairs.items() if cost[i, j] <= gate}


def tracker_step(
    tracks: list[LocalTrack],
    Z: np.ndarray,
    model: MotionModel,
    sensor: SensorModel,
    k: int,
    params: TrackerParams = TrackerParams(),
) -> tuple[list[LocalTrack], list[LocalTrack]]:
    """Advance the tracker by one scan.

    Returns (surviving tracks, confirmed tracks this scan). Input track
    objects are not mutated.
    """
    F = model.transition()
    Q = model.process_noise()
    R = sensor.noise_cov()
    Z = np.asarray(Z, dtype=float).reshape(-1, 2)

    predicted: list[LocalTrack] = []
    for t in tracks:
        t = t.copy()
        t.x = F @ t.x
        t.P = F @ t.P @ F.T + Q
        t.P = 0.5 * (t.P + t.P.T)
        predicted.append(t)

    # Gated GNN association. Gating is a chi-square test on the squared
    # Mahalanobis distance; assignment costs are negative log-likelihoods
    # (d2 + ln det S), so diffuse fresh tracks cannot outbid a converged
    # track for its own detection.
    nT, nZ = len(predicted), len(Z)
    assigned: dict[int, int] = {}
    if nT and nZ:
        cost = np.full((nT, nZ), _BIG)
        for i, t in enumerate(predicted):
            gate = params.gate if t.confirmed else params.tentative_gate
            S = _innovation_cov(t.P, R)
            log_det = float(np.log(np.linalg.det(S)))
            z_pred = H @ t.x
            for j in range(nZ):
                d2 = _mahalanobis_sq(Z[j] - z_pred, S)
                if d2 <= gate:
                    cost[i, j] = d2 + log_det
        assigned = associate(cost, _BIG / 2)

    survivors: list[LocalTrack] = []
    for i, t in enumerate(predicted):
        if i in assigned:
            z = Z[assigned[i]]
            S = _innovation_cov(t.P, R)
            K = np.linalg.solve(S, H @ t.P).T
            t.x = t.x + K @ (z - H @ t.x)
            t.P = (np.eye(4) - K @ H) @ t.P
            t.P = 0.5 * (t.P + t.P.T)
            t.misses = 0
            t.updated = True
            t.hits = (t.hits + (True,))[-params.confirm_window :]
            if not t.confirmed and sum(t.hits) >= params.confirm_hits:
                t.confirmed = True
            survivors.append(t)
        else:
            t.misses += 1
            t.updated = False
            t.hits = (t.hits + (False,))[-params.confirm_window :]
            limit = params.delete_misses if t.confirmed else params.tentative_misses
            if t.misses < limit:
                survivors.append(t)

    # Unassociated measurements spawn tentative tracks; births inside an
    # existing confirmed track's gate are suppressed to avoid growing
    # parallel tracks on one object from the odd stolen detection.
    confirmed_gates = [
        (H @ t.x, _innovation_cov(t.P, R)) for t in predicted if t.confirmed
    ]
    used = set(assigned.values())
    index = max((t.birth_index for t in survivors if t.birth_time == k), default=0)
    for j in range(nZ):
        if j in used:
            continue
        if any(
            _mahalanobis_sq(Z[j] - z_pred, S) <= params.gate
            for z_pred, S in confirmed_gates
        ):
            continue
        index += 1
        survivors.append(_new_track(Z[j], k, index, sensor, params))

    # Only tracks refreshed by a measurement this scan are reported;
    # coasting predictions stay internal. Track domains may get gaps
    # (fragmented tracks), which downstream code supports.
    confirmed = [t for t in survivors if t.confirmed and t.updated]
    return survivors, confirmed


class NodeTracker:
    """Stateful per-node wrapper around tracker_step."""

    def __init__(
        self,
        node_id: int,
        model: MotionModel,
        sensor: SensorModel,
        params: TrackerParams = TrackerParams(),
    ):
        self.node_id = node_id
        self.model = model
        self.sensor = sensor
        self.params = params
        self.tracks: list[LocalTrack] = []

    def step(self, Z: np.ndarray, k: int) -> LabeledStateSet:
        """Process scan k and return the confirmed labelled state estimates."""
        self.tracks, confirmed = tracker_step(
            self.tracks, Z, self.model, self.sensor, k, self.params
        )
        return LabeledStateSet(
            LabeledState(
                t.x.copy(), label_of(t.birth_time, t.birth_index, self.node_id)
            )
            for t in confirmed
        )
