"""Scenario runner: Monte-Carlo orchestration, per-scan metric traces, and
the node-count scaling study.

Each run is fully determined by (scenario, seed): the truth stream and
every sensor stream are derived generators, so reruns are bit-identical
and different fusion methods can be compared on identical inputs.
Fusing-time entries are wall-clock measurements around the fusion calls
only and are the one non-reproducible output.
"""

from __future__ import annotations

import json
import math
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from . import io as tio
from .core import LabeledStateSet, Track, TrackSet, position_of
from .fusion import FusionConfig, fuse_multi_nodes, metropolis_weights
from .kernels import BACKEND
from .metrics import OspaParams, euclidean, ospa, ospa2, positions_at
from .sim import Scenario, generate_measurements, generate_truth
from .tracker import NodeTracker, TrackerParams

METHODS = ("tc-ospa2", "tc-wass", "none")


@dataclass
class RunConfig:
    scenario: Scenario
    method: str = "tc-ospa2"
    runs: int = 20
    seed: int = 0
    outdir: Path | None = None
    window: int | None = None
    clen: int | None = None
    cutoff: float | None = None
    order: int | None = None
    alpha: float | None = None
    eval_node: int | None = None
    metric_window: int = 10
    label_consensus: bool = True
    save_logs: bool = True
    tracker: TrackerParams = field(default_factory=TrackerParams)

    def __post_init__(self) -> None:
        if self.method not in METHODS:
            raise ValueError(f"method must be one of {METHODS}, got {self.method!r}")
        sc = self.scenario
        self.window = sc.window if self.window is None else self.window
        self.clen = sc.clen if self.clen is None else self.clen
        self.cutoff = sc.cutoff if self.cutoff is None else self.cutoff
        self.order = sc.order if self.order is None else self.order
        self.alpha = sc.alpha if self.alpha is None else self.alpha
        self.eval_node = sc.eval_node if self.eval_node is None else self.eval_node

    def fusion_config(self) -> FusionConfig:
        topo = self.scenario.neighbor_sets()
        weights = {
            pair: float(w)
            for pair, w in metropolis_weights(topo).items()
            if pair[0] != pair[1]
        }
        return FusionConfig(
            window_length=self.window,
            c=self.cutoff,
            p=self.order,
            clen=self.clen,
            weights=weights,
            method=self.method if self.method != "none" else "tc-ospa2",
            alpha=self.alpha,
            label_consensus=self.label_consensus,
        )


@dataclass
class SingleRunResult:
    seed: int
    scans: list[int]
    ospa: np.ndarray
    ospa2: np.ndarray
    card_est: np.ndarray
    card_truth: np.ndarray
    fuse_time: np.ndarray
    local_ospa: np.ndarray
    local_ospa2: np.ndarray
    local_card: np.ndarray
    truth: TrackSet
    # node -> label -> scan -> state, accumulated over the run
    local_tracks: dict[int, dict] = field(default_factory=dict)
    consensed: dict[int, dict] = field(default_factory=dict)
    measurements: dict[int, dict[int, np.ndarray]] = field(default_factory=dict)


def _rng_for(seed: int, stream: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([seed, stream]))


def _live_windowed(store: Mapping, estimates: LabeledStateSet, j: int, k: int) -> TrackSet:
    """Window-restricted live tracks pulled from a node's accumulated history;
    equivalent to core.live_tracks over the full stored TrackSet."""
    tracks = []
    for s in estimates:
        samples = {
            scan: x for scan, x in store.get(s.label, {}).items() if j <= scan <= k
        }
        if samples:
            tracks.append(Track(s.label, samples))
    return TrackSet(tracks)


def _tracks_in_window(store: Mapping, j: int, k: int) -> TrackSet:
    tracks = []
    for label, samples in store.items():
        kept = {scan: x for scan, x in samples.items() if j <= scan <= k}
        if kept:
            tracks.append(Track(label, kept))
    return TrackSet(tracks)


def metric_series(
    truth: TrackSet,
    est_samples: Mapping,
    duration: int,
    params: OspaParams,
    metric_window: int = 10,
) -> dict[str, np.ndarray]:
    """Per-scan OSPA / OSPA(2) / cardinality of an estimate history against
    truth. est_samples maps label -> scan -> state; works identically on
    in-process accumulations and on parsed estimate logs."""
    n = duration
    out = {
        "ospa": np.zeros(n),
        "ospa2": np.zeros(n),
        "card_est": np.zeros(n),
        "card_truth": np.zeros(n),
    }
    for k in range(1, duration + 1):
        truth_pos = positions_at(truth, k)
        est_pos = [
            position_of(np.asarray(samples[k], dtype=float))
            for samples in est_samples.values()
            if k in samples
        ]
        out["ospa"][k - 1] = ospa(est_pos, truth_pos, params, base=euclidean)
        j = max(1, k - metric_window + 1)
        truth_win = TrackSet(
            t for t in (tr.restricted(j, k) for tr in truth) if t is not None
        )
        est_win = _tracks_in_window(est_samples, j, k)
        out["ospa2"][k - 1] = ospa2(est_win, truth_win, params)
        out["card_est"][k - 1] = len(est_pos)
        out["card_truth"][k - 1] = len(truth_pos)
    return out


def run_single(config: RunConfig, seed: int) -> SingleRunResult:
    """One Monte-Carlo run: simulate, track per node, fuse per scan, score."""
    sc = config.scenario
    params = OspaParams(p=config.order, c=config.cutoff)
    fcfg = config.fusion_config()
    topo = sc.neighbor_sets()
    fusing = config.method != "none"

    truth = generate_truth(sc, _rng_for(seed, 0))
    sensor_rngs = {s.node_id: _rng_for(seed, s.node_id) for s in sc.sensors}
    trackers = {
        s.node_id: NodeTracker(s.node_id, sc.motion, s, config.tracker)
        for s in sc.sensors
    }

    nodes = sc.node_ids()
    stored: dict[int, dict] = {n: {} for n in nodes}
    consensed: dict[int, dict] = {n: {} for n in nodes}
    measurements: dict[int, dict[int, np.ndarray]] = {n: {} for n in nodes}
    all_hist: dict = {}
    all_labels: dict = {n: () for n in nodes}
    fuse_time = np.zeros(sc.duration)

    for k in range(1, sc.duration + 1):
        truth_states = [t.state_at(k) for t in truth if k in t]
        est_k = {}
        for node in nodes:
            Z = generate_measurements(truth_states, sc.sensor(node), sensor_rngs[node])
            measurements[node][k] = Z
            est_k[node] = trackers[node].step(Z, k)
            for s in est_k[node]:
                stored[node].setdefault(s.label, {})[k] = s.state

        if fusing:
            j = max(1, k - config.window + 1)
            live = {n: _live_windowed(stored[n], est_k[n], j, k) for n in nodes}
            X_con, all_hist, all_labels, elapsed = fuse_multi_nodes(
                live, all_hist, all_labels, fcfg, topo, k
            )
            for node in nodes:
                for s in X_con[node]:
                    consensed[node].setdefault(s.label, {})[k] = s.state
            fuse_time[k - 1] = elapsed[config.eval_node]

    local_series = metric_series(
        truth, stored[config.eval_node], sc.duration, params, config.metric_window
    )
    if fusing:
        fused_series = metric_series(
            truth, consensed[config.eval_node], sc.duration, params, config.metric_window
        )
    else:
        fused_series = local_series

    return SingleRunResult(
        seed=seed,
        scans=list(range(1, sc.duration + 1)),
        ospa=fused_series["ospa"],
        ospa2=fused_series["ospa2"],
        card_est=fused_series["card_est"],
        card_truth=fused_series["card_truth"],
        fuse_time=fuse_time,
        local_ospa=local_series["ospa"],
        local_ospa2=local_series["ospa2"],
        local_card=local_series["card_est"],
        truth=truth,
        local_tracks=stored,
        consensed=consensed,
        measurements=measurements,
    )


@dataclass
class ScenarioAggregate:
    scans: list[int]
    mean_ospa: np.ndarray
    mean_ospa2: np.ndarray
    mean_card_est: np.ndarray
    mean_card_truth: np.ndarray
    mean_fuse_time: np.ndarray
    mean_local_ospa: np.ndarray
    mean_local_ospa2: np.ndarray
    runs_done: int
    failed_seeds: list[int]

    def summary(self) -> dict:
        def m(a):
            return float(np.mean(a)) if len(a) else math.nan

        return {
            "ospa_mean": m(self.mean_ospa),
            "ospa2_mean": m(self.mean_ospa2),
            "local_ospa_mean": m(self.mean_local_ospa),
            "local_ospa2_mean": m(self.mean_local_ospa2),
            "fusing_time_mean_s": m(self.mean_fuse_time),
            "runs": self.runs_done,
            "failed_seeds": self.failed_seeds,
        }


def aggregate_runs(results: Sequence[SingleRunResult], duration: int, failed: list[int]) -> ScenarioAggregate:
    scans = list(range(1, duration + 1))
    if not results:
        z = np.zeros(0)
        return ScenarioAggregate([], z, z, z, z, z, z, z, 0, failed)

    def stack(attr):
        return np.vstack([getattr(r, attr) for r in results])

    return ScenarioAggregate(
        scans=scans,
        mean_ospa=stack("ospa").mean(axis=0),
        mean_ospa2=stack("ospa2").mean(axis=0),
        mean_card_est=stack("card_est").mean(axis=0),
        mean_card_truth=stack("card_truth").mean(axis=0),
        mean_fuse_time=stack("fuse_time").mean(axis=0),
        mean_local_ospa=stack("local_ospa").mean(axis=0),
        mean_local_ospa2=stack("local_ospa2").mean(axis=0),
        runs_done=len(results),
        failed_seeds=failed,
    )


def run_scenario(config: RunConfig) -> tuple[ScenarioAggregate, list[SingleRunResult]]:
    """Run the configured Monte-Carlo experiment; write tables when an
    output directory is set. Failed runs are skipped with their seed
    recorded; remaining runs still complete."""
    results: list[SingleRunResult] = []
    failed: list[int] = []
    for r in range(config.runs):
        seed = config.seed + r
        try:
            results.append(run_single(config, seed))
        except (np.linalg.LinAlgError, FloatingPointError, RuntimeError) as exc:
            print(f"run with seed {seed} aborted: {exc}", file=sys.stderr)
            failed.append(seed)
    agg = aggregate_runs(results, config.scenario.duration, failed)
    if config.outdir is not None:
        write_outputs(config, agg, results)
    return agg, results


def write_outputs(config: RunConfig, agg: ScenarioAggregate, results: Sequence[SingleRunResult]) -> None:
    out = Path(config.outdir)
    out.mkdir(parents=True, exist_ok=True)
    n = max(1, agg.runs_done)

    def sem(rows):
        if agg.runs_done < 2:
            return np.zeros_like(agg.mean_ospa)
        return np.vstack(rows).std(axis=0, ddof=1) / math.sqrt(agg.runs_done)

    ospa_sem = sem([r.ospa for r in results]) if results else np.zeros(0)
    ospa2_sem = sem([r.ospa2 for r in results]) if results else np.zeros(0)
    tio.write_table(
        out / "ospa.csv",
        ["scan", "mean", "sem"],
        [
            (k, float(m), float(s))
            for k, m, s in zip(agg.scans, agg.mean_ospa, ospa_sem)
        ],
    )
    tio.write_table(
        out / "ospa2.csv",
        ["scan", "mean", "sem"],
        [
            (k, float(m), float(s))
            for k, m, s in zip(agg.scans, agg.mean_ospa2, ospa2_sem)
        ],
    )
    tio.write_table(
        out / "cardinality.csv",
        ["scan", "mean_est", "mean_truth"],
        [
            (k, float(e), float(t))
            for k, e, t in zip(agg.scans, agg.mean_card_est, agg.mean_card_truth)
        ],
    )
    tio.write_table(
        out / "fusing_time.csv",
        ["scan", "mean_seconds"],
        [(k, float(t)) for k, t in zip(agg.scans, agg.mean_fuse_time)],
    )
    summary = {
        "scenario": config.scenario.name,
        "method": config.method,
        "seed": config.seed,
        "kernel_backend": BACKEND,
        **agg.summary(),
    }
    with open(out / "summary.json", "w") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")

    if config.save_logs and results:
        logdir = out / "logs"
        logdir.mkdir(exist_ok=True)
        first = results[0]
        tio.write_track_log(logdir / "truth.csv", tio.trackset_rows(0, first.truth))
        tio.write_measurement_log(logdir / "measurements.csv", first.measurements)
        track_rows = []
        cons_rows = []
        for node in sorted(first.local_tracks):
            track_rows.extend(
                tio.trackset_rows(node, _tracks_in_window(first.local_tracks[node], 1, 10**9))
            )
            cons_rows.extend(
                tio.trackset_rows(node, _tracks_in_window(first.consensed[node], 1, 10**9))
            )
        tio.write_track_log(logdir / "tracks.csv", track_rows)
        if config.method != "none":
            tio.write_track_log(logdir / "consensed.csv", cons_rows)


def scaling_study(
    config: RunConfig,
    node_counts: Sequence[int],
    eval_node: int = 2,
) -> list[dict]:
    """Re-run the scenario truncated to each node count over the same truth;
    report mean fusing time and accuracy at the evaluation node."""
    rows = []
    for n in node_counts:
        if n < 2:
            raise ValueError("scaling study needs at least 2 nodes")
        sub = config.scenario.truncated(n)
        sub_cfg = RunConfig(
            scenario=sub,
            method=config.method,
            runs=config.runs,
            seed=config.seed,
            outdir=None,
            window=config.window,
            clen=config.clen,
            cutoff=config.cutoff,
            order=config.order,
            alpha=config.alpha,
            eval_node=eval_node,
            metric_window=config.metric_window,
            label_consensus=config.label_consensus,
            tracker=config.tracker,
        )
        agg, results = run_scenario(sub_cfg)
        ospa_runs = np.array([float(np.mean(r.ospa)) for r in results])
        rows.append(
            {
                "n_nodes": n,
                "mean_fusing_time_s": float(np.mean(agg.mean_fuse_time)),
                "mean_ospa": float(np.mean(agg.mean_ospa)),
                "mean_ospa2": float(np.mean(agg.mean_ospa2)),
                "sem_ospa": float(ospa_runs.std(ddof=1) / math.sqrt(len(ospa_runs)))
                if len(ospa_runs) > 1
                else 0.0,
            }
        )
    if config.outdir is not None:
        out = Path(config.outdir)
        out.mkdir(parents=True, exist_ok=True)
        tio.write_table(
            out / "scaling.csv",
            ["n_nodes", "mean_fusing_time_s", "mean_ospa", "mean_ospa2", "sem_ospa"],
            [
                (
                    r["n_nodes"],
                    r["mean_fusing_time_s"],
                    r["mean_ospa"],
                    r["mean_ospa2"],
                    r["sem_ospa"],
                )
                for r in rows
            ],
        )
    return rows
