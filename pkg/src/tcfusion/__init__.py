"""Track-consensus fusion for distributed multi-object tracking with
limited field-of-view sensors.

Library layout:
    core        labels, tracks, track sets, window restriction
    metrics     OSPA, OSPA track-to-track distance, OSPA(2), Wasserstein
    assignment  exact optimal assignment and balanced transport
    fusion      matched pairs, matched history, two-/multi-node consensus,
                label consensus, Metropolis weights
    sim         scenarios, ground truth, limited-FoV sensing
    tracker     baseline GNN-Kalman local tracker
    harness     Monte-Carlo runner, metric traces, scaling study
    kernels     compiled/pure-python hot-kernel backends
"""

from .core import (
    ConsistencyError,
    GlobalLabel,
    InvalidWindowError,
    LabeledState,
    LabeledStateSet,
    LocalLabel,
    Track,
    TrackSet,
    UndefinedDistanceError,
    label_of,
    live_tracks,
    position_of,
    restrict_window,
)
from .metrics import (
    OspaParams,
    WassersteinParams,
    ospa,
    ospa2,
    ospa_track_distance,
    wasserstein,
    wasserstein_track_distance,
)
from .assignment import Assignment, TransportPlan, min_cost_transport, optimal_assignment
from .fusion import (
    FusionConfig,
    MatchedHistory,
    MatchedPairs,
    determine_matched_pairs,
    empirical_existence_probability,
    fuse_multi_nodes,
    fuse_two_nodes,
    label_consistency_margin,
    metropolis_weights,
    update_labels,
    update_matched_history,
)
from .kernels import BACKEND

__version__ = "0.1.0"

__all__ = [
    "Assignment",
    "BACKEND",
    "ConsistencyError",
    "FusionConfig",
    "GlobalLabel",
    "InvalidWindowError",
    "LabeledState",
    "LabeledStateSet",
    "LocalLabel",
    "MatchedHistory",
    "MatchedPairs",
    "OspaParams",
    "Track",
    "TrackSet",
    "TransportPlan",
    "UndefinedDistanceError",
    "WassersteinParams",
    "determine_matched_pairs",
    "empirical_existence_probability",
    "fuse_multi_nodes",
    "fuse_two_nodes",
    "label_consistency_margin",
    "label_of",
    "live_tracks",
    "metropolis_weights",
    "min_cost_transport",
    "optimal_assignment",
    "ospa",
    "ospa2",
    "ospa_track_distance",
    "position_of",
    "restrict_window",
    "update_labels",
    "update_matched_history",
    "wasserstein",
    "wasserstein_track_distance",
]
