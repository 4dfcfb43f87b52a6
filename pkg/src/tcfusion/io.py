"""Delimited-text logs shared by the simulator, tracker, fusion, and CLI.

Track log (CSV, one record per node/scan/label):
    node_id,scan,birth_time,birth_index,label_node,x0,...,x{d-1}

node_id is the node that produced the record (0 for ground truth; for
consensed-estimate logs it is the node performing the fusion). The label
triple (birth_time, birth_index, label_node) is the global label, which
for a node's own local tracks has label_node == node_id.

Measurement log (CSV): node_id,scan,z0,z1

Floats are written with repr-fidelity (%.17g) so logs round-trip exactly.
"""

from __future__ import annotations

import csv
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .core import GlobalLabel, LabeledStateSet, Track, TrackSet, label_of

TRACK_FIELDS = ["node_id", "scan", "birth_time", "birth_index", "label_node"]


def _fmt(v: float) -> str:
    return format(float(v), ".17g")


def _track_header(dim: int) -> list[str]:
    return TRACK_FIELDS + [f"x{i}" for i in range(dim)]


def estimate_rows(node_id: int, scan: int, estimates: LabeledStateSet) -> list[list[str]]:
    rows = []
    for s in estimates:
        lab = s.label
        rows.append(
            [str(node_id), str(scan), str(lab.birth_time), str(lab.birth_index), str(lab.node_id)]
            + [_fmt(v) for v in np.asarray(s.state, dtype=float)]
        )
    return rows


def trackset_rows(node_id: int, tracks: TrackSet) -> list[list[str]]:
    rows = []
    for t in tracks:
        lab = t.label
        for scan, x in t.items():
            rows.append(
                [str(node_id), str(scan), str(lab.birth_time), str(lab.birth_index), str(lab.node_id)]
                + [_fmt(v) for v in x]
            )
    return rows


def write_track_log(path: str | Path, rows: Iterable[Sequence[str]], dim: int = 4) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(_track_header(dim))
        writer.writerows(rows)


def serialize_tracksets(per_node: Mapping[int, TrackSet]) -> bytes:
    """Canonical byte serialization of per-node track sets (for the
    no-feedback check and for golden comparisons)."""
    lines = []
    for node_id in sorted(per_node):
        for row in trackset_rows(node_id, per_node[node_id]):
            lines.append(",".join(row))
    return ("\n".join(lines) + "\n").encode()


def read_track_log(path: str | Path) -> dict[int, dict[GlobalLabel, dict[int, np.ndarray]]]:
    """Parse a track log into node -> label -> scan -> state."""
    out: dict[int, dict[GlobalLabel, dict[int, np.ndarray]]] = {}
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        dim = len(header) - len(TRACK_FIELDS)
        for row in reader:
            node_id = int(row[0])
            scan = int(row[1])
            lab = label_of(int(row[2]), int(row[3]), int(row[4]))
            state = np.array([float(v) for v in row[5 : 5 + dim]])
            out.setdefault(node_id, {}).setdefault(lab, {})[scan] = state
    return out


def tracksets_from_log(
    parsed: Mapping[int, Mapping[GlobalLabel, Mapping[int, np.ndarray]]]
) -> dict[int, TrackSet]:
    return {
        node_id: TrackSet(Track(lab, dict(samples)) for lab, samples in by_label.items())
        for node_id, by_label in parsed.items()
    }


def write_measurement_log(
    path: str | Path, measurements: Mapping[int, Mapping[int, np.ndarray]]
) -> None:
    """measurements: node -> scan -> (n, 2) array."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["node_id", "scan", "z0", "z1"])
        for node_id in sorted(measurements):
            by_scan = measurements[node_id]
            for scan in sorted(by_scan):
                for z in np.asarray(by_scan[scan]).reshape(-1, 2):
                    writer.writerow([str(node_id), str(scan), _fmt(z[0]), _fmt(z[1])])


def read_measurement_log(path: str | Path) -> dict[int, dict[int, np.ndarray]]:
    tmp: dict[int, dict[int, list[list[float]]]] = {}
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        next(reader)
        for row in reader:
            node_id, scan = int(row[0]), int(row[1])
            tmp.setdefault(node_id, {}).setdefault(scan, []).append(
                [float(row[2]), float(row[3])]
            )
    return {
        node: {scan: np.array(zs) for scan, zs in by_scan.items()}
        for node, by_scan in tmp.items()
    }


def write_table(path: str | Path, header: Sequence[str], rows: Iterable[Sequence]) -> None:
    """Small CSV helper for metric tables; floats get stable formatting."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow(
                [_fmt(v) if isinstance(v, float) else str(v) for v in row]
            )
