"""2D direction-of-arrival estimation for L-shaped sensor arrays with failed
elements: build an incomplete virtual correlation tensor from faulty
snapshots, recover its CP factors by masked alternating least squares, and
read the paired (elevation, azimuth) angles off the middle factor.
"""

from .array_sim import (
    ArrayGeometry,
    FaultMask,
    SnapshotSet,
    SourceParams,
    generate_snapshots,
    random_fault_mask,
    steering_phase,
)
from .cp_als import CPModel, SolveReport, SolverOptions, als_solve, init_factors, update_mode, weighted_fit
from .doa import (
    AngleEstimate,
    EstimationResult,
    ExtractionError,
    ScoredResult,
    extract_angles,
    estimate_from_tensor,
    match_and_score,
)
from .pipeline import (
    BlindDetector,
    OracleDetector,
    SubarrayConfig,
    TargetTensorPair,
    build_target,
    cross_correlation,
    conjugate_augment,
    detect_mask,
    ideal_cross_correlation,
    ideal_factors,
    ideal_target,
    merge_to_target,
    partition_subarrays,
    propagate_fault_mask,
    sliding_split,
)
from .scenario import ConfigError, DetectorSpec, FaultSpec, Scenario, SolverSpec, preset

__version__ = "0.1.0"

__all__ = [
    "AngleEstimate",
    "ArrayGeometry",
    "BlindDetector",
    "ConfigError",
    "CPModel",
    "DetectorSpec",
    "EstimationResult",
    "ExtractionError",
    "FaultMask",
    "FaultSpec",
    "OracleDetector",
    "Scenario",
    "ScoredResult",
    "SnapshotSet",
    "SolveReport",
    "SolverOptions",
    "SolverSpec",
    "SourceParams",
    "SubarrayConfig",
    "TargetTensorPair",
    "als_solve",
    "build_target",
    "conjugate_augment",
    "cross_correlation",
    "detect_mask",
    "estimate_from_tensor",
    "extract_angles",
    "generate_snapshots",
    "ideal_cross_correlation",
    "ideal_factors",
    "ideal_target",
    "init_factors",
    "match_and_score",
    "merge_to_target",
    "partition_subarrays",
    "preset",
    "propagate_fault_mask",
    "random_fault_mask",
    "sliding_split",
    "steering_phase",
    "update_mode",
    "weighted_fit",
]
