"""scaletop: scale-space analysis of 1-D signals.

Fractional-order kernel family evaluation, spectral field synthesis,
level-curve extraction and classification, zero-crossing trees, and
bifurcation scanning with integer topological invariants.
"""

from __future__ import annotations

from .errors import (
    BudgetExceeded,
    ConfigError,
    DegenerateLevel,
    GridTooCoarse,
    InconsistentEuler,
    IndexMismatch,
    NestingConflict,
    NoConvergence,
    NonUniformSampling,
    NotTransient,
    OrientationAmbiguous,
    ScaletopError,
    SmoothnessViolation,
    TopologyViolation,
    TruncationFailure,
    UnresolvedEvent,
)
from .contours import (
    ClassificationReport,
    ContourSet,
    LevelCurve,
    classify_component,
    contour_rows,
    extract_level_set,
    genericity_check,
    orient_and_energy,
)
from .kernels import (
    KernelParams,
    SeriesEvalConfig,
    Z_MAX,
    eval_kernel,
    eval_series_even,
    eval_series_odd,
    even_transform_constant,
    kernel_spectrum,
    odd_transform_constant,
    ode_residual,
    sample_kernel_grid,
    transfer,
)
from .spectral import (
    FieldGrid,
    FieldStack,
    SignalGrid,
    SmoothnessBudget,
    Spectrum,
    estimate_decay_order,
    forward_transform,
    fractional_derivative,
    geometric_ladder,
    inverse_transform,
    pde_residual,
    synth_field,
)
from .trees import (
    ScaleTree,
    TreeNode,
    TreeSignature,
    arch_top,
    build_tree,
    canonicalize,
    tree_equal,
    tree_json,
)
from .bifurcations import (
    BifurcationEvent,
    InvariantTable,
    MorseReport,
    ParamScan,
    RegionInvariants,
    ScanSummary,
    SliceComponent,
    SliceGraph,
    classify_index,
    invariant_table,
    locate_critical_point,
    morse_report,
    scan,
    scan_report,
)

__version__ = "0.1.0"

__all__ = [
    "BifurcationEvent",
    "BudgetExceeded",
    "ClassificationReport",
    "ConfigError",
    "ContourSet",
    "DegenerateLevel",
    "FieldGrid",
    "FieldStack",
    "GridTooCoarse",
    "InconsistentEuler",
    "IndexMismatch",
    "InvariantTable",
    "KernelParams",
    "LevelCurve",
    "MorseReport",
    "NestingConflict",
    "NoConvergence",
    "NonUniformSampling",
    "NotTransient",
    "OrientationAmbiguous",
    "ParamScan",
    "RegionInvariants",
    "ScaleTree",
    "ScaletopError",
    "ScanSummary",
    "SeriesEvalConfig",
    "SignalGrid",
    "SliceComponent",
    "SliceGraph",
    "SmoothnessBudget",
    "SmoothnessViolation",
    "Spectrum",
    "TopologyViolation",
    "TreeNode",
    "TreeSignature",
    "TruncationFailure",
    "UnresolvedEvent",
    "Z_MAX",
    "arch_top",
    "build_tree",
    "canonicalize",
    "classify_component",
    "classify_index",
    "contour_rows",
    "estimate_decay_order",
    "eval_kernel",
    "eval_series_even",
    "eval_series_odd",
    "even_transform_constant",
    "extract_level_set",
    "forward_transform",
    "fractional_derivative",
    "genericity_check",
    "geometric_ladder",
    "invariant_table",
    "inverse_transform",
    "kernel_spectrum",
    "locate_critical_point",
    "morse_report",
    "odd_transform_constant",
    "ode_residual",
    "orient_and_energy",
    "pde_residual",
    "sample_kernel_grid",
    "scan",
    "scan_report",
    "synth_field",
    "transfer",
    "tree_equal",
    "tree_json",
    "__version__",
]
