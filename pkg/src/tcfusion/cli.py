"""Command-line interface.

Subcommands: simulate, track, fuse, evaluate, run, scale. Exit codes:
0 success, 2 usage error (argparse), 3 bad configuration, 4 runtime
failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import io as tio
from .core import LabeledState, LabeledStateSet
from .fusion import fuse_multi_nodes
from .harness import (
    METHODS,
    RunConfig,
    metric_series,
    run_scenario,
    run_single,
    scaling_study,
)
from .kernels import BACKEND
from .metrics import OspaParams
from .sim import ConfigError, generate_measurements, generate_truth, resolve_scenario
from .tracker import NodeTracker

EXIT_CONFIG = 3
EXIT_RUNTIME = 4


def _add_fusion_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--method", choices=METHODS, default="tc-ospa2")
    p.add_argument("--window", type=int, default=None, help="consensus window length (scans)")
    p.add_argument("--clen", type=int, default=None, help="minimum retained track length")
    p.add_argument("--cutoff", type=float, default=None, help="OSPA cut-off c (m)")
    p.add_argument("--order", type=int, default=None, help="OSPA order p")
    p.add_argument("--alpha", type=float, default=None, help="time-embedding weight (tc-wass)")
    p.add_argument("--eval-node", type=int, default=None)
    p.add_argument(
        "--no-label-consensus",
        action="store_true",
        help="skip the label-consensus rewrite of consensed labels",
    )


def _run_config(args, scenario) -> RunConfig:
    return RunConfig(
        scenario=scenario,
        method=args.method,
        runs=getattr(args, "runs", 1),
        seed=args.seed,
        outdir=Path(args.out) if args.out else None,
        window=args.window,
        clen=args.clen,
        cutoff=args.cutoff,
        order=args.order,
        alpha=args.alpha,
        eval_node=args.eval_node,
        label_consensus=not args.no_label_consensus,
    )


def cmd_simulate(args) -> int:
    scenario = resolve_scenario(args.scenario)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    truth = generate_truth(scenario, np.random.default_rng(np.random.SeedSequence([args.seed, 0])))
    measurements = {}
    for sensor in scenario.sensors:
        rng = np.random.default_rng(np.random.SeedSequence([args.seed, sensor.node_id]))
        by_scan = {}
        for k in range(1, scenario.duration + 1):
            states = [t.state_at(k) for t in truth if k in t]
            by_scan[k] = generate_measurements(states, sensor, rng)
        measurements[sensor.node_id] = by_scan
    tio.write_track_log(out / "truth.csv", tio.trackset_rows(0, truth))
    tio.write_measurement_log(out / "measurements.csv", measurements)
    print(f"wrote {out / 'truth.csv'} and {out / 'measurements.csv'}")
    return 0


def cmd_track(args) -> int:
    scenario = resolve_scenario(args.scenario)
    measurements = tio.read_measurement_log(args.measurements)
    rows = []
    for sensor in scenario.sensors:
        tracker = NodeTracker(sensor.node_id, scenario.motion, sensor)
        store: dict = {}
        for k in range(1, scenario.duration + 1):
            Z = measurements.get(sensor.node_id, {}).get(k, np.zeros((0, 2)))
            for s in tracker.step(Z, k):
                store.setdefault(s.label, {})[k] = s.state
        for label in sorted(store, key=lambda l: l.sort_key()):
            for scan in sorted(store[label]):
                rows.append(
                    [
                        str(sensor.node_id),
                        str(scan),
                        str(label.birth_time),
                        str(label.birth_index),
                        str(label.node_id),
                    ]
                    + [format(float(v), ".17g") for v in store[label][scan]]
                )
    tio.write_track_log(args.out, rows)
    print(f"wrote {args.out}")
    return 0


def cmd_fuse(args) -> int:
    """Replay per-node track logs scan by scan through the fusion pipeline.

    This is the tracker-agnostic entry point: the log may come from any
    tracker as long as it follows the documented format.
    """
    scenario = resolve_scenario(args.scenario)
    parsed = tio.read_track_log(args.tracks)
    cfg = _run_config(args, scenario)
    fcfg = cfg.fusion_config()
    topo = scenario.neighbor_sets()
    nodes = scenario.node_ids()

    stores = {n: parsed.get(n, {}) for n in nodes}
    all_hist: dict = {}
    all_labels: dict = {n: () for n in nodes}
    cons_rows = []
    from .core import Track, TrackSet

    for k in range(1, scenario.duration + 1):
        j = max(1, k - cfg.window + 1)
        live = {}
        for n in nodes:
            tracks = []
            for label, samples in stores[n].items():
                if k in samples:
                    kept = {s: x for s, x in samples.items() if j <= s <= k}
                    tracks.append(Track(label, kept))
            live[n] = TrackSet(tracks)
        X_con, all_hist, all_labels, _ = fuse_multi_nodes(
            live, all_hist, all_labels, fcfg, topo, k
        )
        for n in nodes:
            cons_rows.extend(tio.estimate_rows(n, k, X_con[n]))
    tio.write_track_log(args.out, cons_rows)
    print(f"wrote {args.out}")
    return 0


def cmd_evaluate(args) -> int:
    truth_parsed = tio.read_track_log(args.truth)
    truth = tio.tracksets_from_log(truth_parsed)[0]
    est_parsed = tio.read_track_log(args.estimates)
    if args.node not in est_parsed:
        raise ConfigError(f"node {args.node} absent from {args.estimates}")
    params = OspaParams(p=args.order or 1, c=args.cutoff or 100.0)
    duration = max(max(samples) for samples in truth_parsed[0].values())
    series = metric_series(
        truth, est_parsed[args.node], duration, params, args.metric_window
    )
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    tio.write_table(
        out / "metrics.csv",
        ["scan", "ospa", "ospa2", "card_est", "card_truth"],
        [
            (
                k + 1,
                float(series["ospa"][k]),
                float(series["ospa2"][k]),
                float(series["card_est"][k]),
                float(series["card_truth"][k]),
            )
            for k in range(duration)
        ],
    )
    print(f"wrote {out / 'metrics.csv'}")
    return 0


def cmd_run(args) -> int:
    scenario = resolve_scenario(args.scenario)
    cfg = _run_config(args, scenario)
    agg, _ = run_scenario(cfg)
    summary = agg.summary()
    summary["method"] = args.method
    summary["kernel_backend"] = BACKEND
    print(json.dumps(summary, indent=2, sort_keys=True))
    return 0


def cmd_scale(args) -> int:
    scenario = resolve_scenario(args.scenario)
    cfg = _run_config(args, scenario)
    counts = [int(v) for v in args.nodes.split(",")]
    rows = scaling_study(cfg, counts, eval_node=args.scale_eval_node)
    for row in rows:
        print(
            f"nodes={row['n_nodes']:3d}  fusing_time={row['mean_fusing_time_s']:.6f}s  "
            f"ospa={row['mean_ospa']:.2f}m  ospa2={row['mean_ospa2']:.2f}m"
        )
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tcfusion",
        description="Track-consensus fusion simulator for distributed multi-object tracking",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="generate truth and measurement logs")
    p.add_argument("--scenario", required=True, help="YAML path or builtin name (scenario1..3, example1)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("track", help="run per-node trackers over a measurement log")
    p.add_argument("--scenario", required=True)
    p.add_argument("--measurements", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_track)

    p = sub.add_parser("fuse", help="fuse per-node track logs into consensed estimates")
    p.add_argument("--scenario", required=True)
    p.add_argument("--tracks", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    _add_fusion_flags(p)
    p.set_defaults(func=cmd_fuse)

    p = sub.add_parser("evaluate", help="metric tables from truth and estimate logs")
    p.add_argument("--truth", required=True)
    p.add_argument("--estimates", required=True)
    p.add_argument("--node", type=int, required=True)
    p.add_argument("--cutoff", type=float, default=100.0)
    p.add_argument("--order", type=int, default=1)
    p.add_argument("--metric-window", type=int, default=10)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("run", help="end-to-end Monte-Carlo experiment")
    p.add_argument("--scenario", required=True)
    p.add_argument("--runs", type=int, default=20)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=None)
    _add_fusion_flags(p)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("scale", help="fusing-time scaling study over node counts")
    p.add_argument("--scenario", required=True)
    p.add_argument("--nodes", default="2,4,6,8", help="comma-separated node counts")
    p.add_argument("--runs", type=int, default=3)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=None)
    p.add_argument("--scale-eval-node", type=int, default=2)
    _add_fusion_flags(p)
    p.set_defaults(func=cmd_scale)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
