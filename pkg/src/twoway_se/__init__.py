"""Two-way cluster-robust inference for balanced panels."""

from .bandwidth import (
    AR1Estimate,
    BandwidthChoice,
    BandwidthRule,
    andrews_m,
    ar1_coefficients,
    select_bandwidth,
    stock_watson_m,
)
from .errors import (
    CollinearityError,
    DegeneratePanelError,
    DuplicateError,
    ImbalanceError,
    LagRangeError,
    ParseError,
    SchemaError,
    TwoWayError,
)
from .estimators import EstimatorSpec, parse_estimator
from .panel import (
    BalancedPanel,
    LongPanel,
    PanelSchema,
    TransformedPanel,
    flatten,
    load_long_csv,
    panel_from_json,
    panel_to_json,
    to_balanced,
    within_transform,
)
from .regression import (
    CovarianceResult,
    InferenceRow,
    RegressionFit,
    fe_fit,
    inference_table,
    ols_fit,
    sandwich,
    time_effect_diagnostics,
    wald_test,
)
from .variance import (
    ClusterSums,
    EstimatorKind,
    OmegaEstimate,
    ScoreMatrix,
    WeightKind,
    cluster_sums,
    evc,
    kernel_weight,
    lag_cross_sums,
    omega_cgm,
    omega_chs,
    omega_cluster,
    omega_ehw,
    omega_thompson,
    scores,
)

__all__ = [
    "EstimatorSpec",
    "parse_estimator",
    "andrews_m",
    "ar1_coefficients",
    "AR1Estimate",
    "BalancedPanel",
    "BandwidthChoice",
    "BandwidthRule",
    "cluster_sums",
    "ClusterSums",
    "CollinearityError",
    "CovarianceResult",
    "DegeneratePanelError",
    "DuplicateError",
    "EstimatorKind",
    "evc",
    "fe_fit",
    "flatten",
    "ImbalanceError",
    "inference_table",
    "InferenceRow",
    "kernel_weight",
    "lag_cross_sums",
    "LagRangeError",
    "load_long_csv",
    "LongPanel",
    "ols_fit",
    "omega_cgm",
    "omega_chs",
    "omega_cluster",
    "omega_ehw",
    "omega_thompson",
    "OmegaEstimate",
    "panel_from_json",
    "panel_to_json",
    "PanelSchema",
    "ParseError",
    "RegressionFit",
    "sandwich",
    "SchemaError",
    "ScoreMatrix",
    "scores",
    "select_bandwidth",
    "stock_watson_m",
    "time_effect_diagnostics",
    "to_balanced",
    "TransformedPanel",
    "TwoWayError",
    "wald_test",
    "WeightKind",
    "within_transform",
]

__version__ = "0.1.0"
