"""Named covariance estimators, bundling an Omega estimator with its options."""

from __future__ import annotations

from dataclasses import dataclass

from .bandwidth import BandwidthRule, fixed_m, select_bandwidth
from .errors import UnknownEstimatorError
from .regression import CovarianceResult, RegressionFit, sandwich
from .variance import (
    EstimatorKind,
    WeightKind,
    cluster_sums,
    omega_cgm,
    omega_chs,
    omega_cluster,
    omega_ehw,
    omega_thompson,
)

__all__ = ["EstimatorSpec", "parse_estimator", "ALL_KINDS", "THOMPSON_DEFAULT_LAGS"]

THOMPSON_DEFAULT_LAGS = 2
ALL_KINDS = tuple(k.value for k in EstimatorKind)

_ALIASES = {
    "HC0": "EHW",
    "CRI": "CR_I",
    "CR-I": "CR_I",
    "CRT": "CR_T",
    "CR-T": "CR_T",
    "T": "THOMPSON",
}


@dataclass(frozen=True)
class EstimatorSpec:
    """One covariance estimator and its tuning choices.

    ``m`` is the lag truncation for THOMPSON (an integer) or, for CHS, a fixed
    value that overrides ``bandwidth``.
    """

    kind: EstimatorKind
    m: float | None = None
    weights: WeightKind = WeightKind.TRIANGULAR
    evc: bool = True
    bandwidth: BandwidthRule = BandwidthRule.ANDREWS

    @property
    def name(self) -> str:
        return self.kind.value

    @property
    def label(self) -> str:
        """Name plus any non-default options, unique within a report."""
        opts = []
        if self.m is not None:
            opts.append(f"m={self.m:g}")
        if self.kind is EstimatorKind.CHS:
            if self.m is None and self.bandwidth is not BandwidthRule.ANDREWS:
                opts.append(self.bandwidth.value.lower())
            if self.weights is not WeightKind.TRIANGULAR:
                opts.append(self.weights.value)
            if not self.evc:
                opts.append("noevc")
        return self.name + (f"[{','.join(opts)}]" if opts else "")

    def covariance(self, fit: RegressionFit, sc=None, dof_adjustment: float = 1.0) -> CovarianceResult:
        sc = fit.scores() if sc is None else sc
        kind = self.kind
        choice = None
        if kind is EstimatorKind.EHW:
            omega = omega_ehw(sc)
        elif kind is EstimatorKind.CR_I:
            omega = omega_cluster(sc, "unit")
        elif kind is EstimatorKind.CR_T:
            omega = omega_cluster(sc, "time")
        elif kind is EstimatorKind.CGM:
            omega = omega_cgm(sc)
        elif kind is EstimatorKind.THOMPSON:
            m = THOMPSON_DEFAULT_LAGS if self.m is None else int(self.m)
            omega = omega_thompson(sc, m)
            choice = fixed_m(m)
        else:
            if self.m is not None:
                choice = fixed_m(self.m, sc.n_periods)
            else:
                choice = select_bandwidth(cluster_sums(sc), self.bandwidth)
            omega = omega_chs(sc, choice.m_value, self.weights, self.evc)
        return sandwich(fit, omega, dof_adjustment, bandwidth=choice)


def parse_estimator(spec: "str | EstimatorSpec", **options) -> EstimatorSpec:
    """Build an :class:`EstimatorSpec` from a name such as ``"CHS"`` or ``"cr_i"``."""
    if isinstance(spec, EstimatorSpec):
        return spec
    key = str(spec).strip().upper()
    key = _ALIASES.get(key, key)
    try:
        kind = EstimatorKind(key)
    except ValueError:
        raise UnknownEstimatorError(
            f"unknown estimator {spec!r}; choose from {', '.join(ALL_KINDS)}"
        ) from None
    if "weights" in options and options["weights"] is not None:
        options["weights"] = WeightKind(options["weights"])
    if "bandwidth" in options and options["bandwidth"] is not None:
        b = options["bandwidth"]
        options["bandwidth"] = b if isinstance(b, BandwidthRule) else BandwidthRule(
            str(b).upper().replace("-", "_"))
    return EstimatorSpec(kind, **{k: v for k, v in options.items() if v is not None})
