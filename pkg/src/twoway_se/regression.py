"""Least squares and two-way within estimation with sandwich inference."""

from __future__ import annotations

import io
import csv
import json
from dataclasses import dataclass
from typing import Any, Sequence

import numpy as np
import scipy.linalg
from scipy import stats

from .errors import (
    CollinearityError,
    DegeneratePanelError,
    DimensionError,
    SingularRestrictionError,
)
from .panel import BalancedPanel, within_transform
from .variance import OmegaEstimate, ScoreMatrix, scores as _scores

__all__ = [
    "CONDITION_LIMIT",
    "RegressionFit",
    "CovarianceResult",
    "InferenceRow",
    "WaldResult",
    "TimeEffectDiagnostics",
    "ols_fit",
    "fe_fit",
    "sandwich",
    "inference_table",
    "wald_test",
    "time_effect_diagnostics",
    "format_table",
    "rows_to_csv",
]

CONDITION_LIMIT = 1e12


@dataclass(frozen=True, eq=False)
class RegressionFit:
    beta_hat: np.ndarray
    residuals: np.ndarray  # (N, T)
    q_hat: np.ndarray
    used_fixed_effects: bool
    n_units: int
    n_periods: int
    design: np.ndarray | None = None  # (N, T, k) regressors actually used
    columns: tuple[str, ...] = ()

    @property
    def k(self) -> int:
        return self.beta_hat.shape[0]

    def scores(self) -> ScoreMatrix:
        if self.design is None:
            raise ValueError("fit carries no design array")
        return _scores(self.design, self.residuals)


@dataclass(frozen=True, eq=False)
class CovarianceResult:
    v_hat: np.ndarray
    omega: OmegaEstimate
    std_errors: np.ndarray
    negative_variance_flags: np.ndarray
    dof_adjustment: float = 1.0
    bandwidth: Any = None  # BandwidthChoice when a lag rule was used

    def to_dict(self) -> dict[str, Any]:
        return {
            "v_hat": self.v_hat.tolist(),
            "std_errors": self.std_errors.tolist(),
            "negative_variance_flags": [bool(f) for f in self.negative_variance_flags],
            "dof_adjustment": self.dof_adjustment,
            "omega": self.omega.to_dict(),
            "bandwidth": None if self.bandwidth is None else self.bandwidth.to_dict(),
        }


@dataclass(frozen=True)
class InferenceRow:
    name: str
    estimate: float
    std_error: float
    t_stat: float | None
    p_value: float | None
    ci_lower: float
    ci_upper: float
    level: float
    negative_variance: bool = False

    def to_dict(self) -> dict[str, Any]:
        return dict(self.__dict__)


@dataclass(frozen=True)
class WaldResult:
    statistic: float
    df: int
    p_value: float


def _check_rank(X: np.ndarray):
    """Pivoted QR of ``X``; raises when the design is numerically rank deficient."""
    q, r, piv = scipy.linalg.qr(X, mode="economic", pivoting=True)
    diag = np.abs(np.diag(r))
    if diag.size == 0 or diag[0] == 0.0:
        raise CollinearityError("design matrix is identically zero", column=int(piv[0]))
    ratio = diag / diag[0]
    bad = np.nonzero(ratio * CONDITION_LIMIT <= 1.0)[0]
    if bad.size:
        j = int(piv[bad[0]])
        raise CollinearityError(
            f"regressor column {j} is collinear with the others "
            f"(relative condition number exceeds {CONDITION_LIMIT:g})",
            column=j,
        )
    return q, r, piv


def _least_squares(X: np.ndarray, y: np.ndarray) -> np.ndarray:
    q, r, piv = _check_rank(X)
    if np.linalg.cond(r) > CONDITION_LIMIT:
        j = int(piv[-1])
        raise CollinearityError(
            f"regressor column {j} is collinear with the others "
            f"(relative condition number exceeds {CONDITION_LIMIT:g})",
            column=j,
        )
    z = scipy.linalg.solve_triangular(r, q.T @ y)
    beta = np.empty_like(z)
    beta[piv] = z
    return beta


def _fit(design: np.ndarray, y: np.ndarray, used_fe: bool, columns) -> RegressionFit:
    n, t, k = design.shape
    X = design.reshape(n * t, k)
    yv = y.reshape(n * t)
    beta = _least_squares(X, yv)
    resid = (yv - X @ beta).reshape(n, t)
    q_hat = (X.T @ X) / (n * t)
    q_hat = 0.5 * (q_hat + q_hat.T)
    design = design.copy()
    design.flags.writeable = False
    return RegressionFit(
        beta_hat=beta, residuals=resid, q_hat=q_hat, used_fixed_effects=used_fe,
        n_units=n, n_periods=t, design=design, columns=tuple(columns),
    )


def ols_fit(panel: BalancedPanel, add_intercept: bool = False) -> RegressionFit:
    """Pooled least squares, optionally with a leading intercept column ``const``."""
    design = panel.x
    columns = tuple(panel.columns)
    if add_intercept:
        ones = np.ones(panel.y.shape + (1,))
        design = np.concatenate([ones, design], axis=2)
        columns = ("const",) + columns
    return _fit(np.asarray(design, dtype=float), panel.y, False, columns)


def fe_fit(panel: BalancedPanel) -> RegressionFit:
    """Two-way within estimator: least squares of the double-demeaned outcome
    on the double-demeaned regressors, no intercept."""
    if panel.n_units < 2 or panel.n_periods < 2:
        raise DegeneratePanelError(
            f"two-way fixed effects need N >= 2 and T >= 2, got N={panel.n_units}, "
            f"T={panel.n_periods}"
        )
    within = within_transform(panel)
    for j in range(panel.k):
        before = np.linalg.norm(panel.x[:, :, j])
        after = np.linalg.norm(within.x[:, :, j])
        if after * CONDITION_LIMIT <= before or after == 0.0:
            raise CollinearityError(
                f"regressor column {j} ({panel.columns[j]}) is absorbed by the unit "
                "and time effects",
                column=j,
            )
    return _fit(within.x, within.y, True, panel.columns)


def sandwich(fit: RegressionFit, omega: OmegaEstimate | np.ndarray,
             dof_adjustment: float = 1.0, bandwidth=None) -> CovarianceResult:
    if not isinstance(omega, OmegaEstimate):
        omega = OmegaEstimate(np.asarray(omega, dtype=float), None)
    k = fit.q_hat.shape[0]
    if omega.matrix.shape != (k, k):
        raise DimensionError(f"omega is {omega.matrix.shape}, fit has k={k}")
    if not dof_adjustment > 0:
        raise ValueError("dof_adjustment must be positive")
    q_inv = scipy.linalg.cho_solve(scipy.linalg.cho_factor(fit.q_hat), np.eye(k))
    v = dof_adjustment * (q_inv @ omega.matrix @ q_inv)
    v = 0.5 * (v + v.T)
    diag = np.diag(v)
    flags = diag < 0
    se = np.sqrt(np.where(flags, 0.0, diag))
    return CovarianceResult(
        v_hat=v, omega=omega, std_errors=se, negative_variance_flags=flags,
        dof_adjustment=float(dof_adjustment), bandwidth=bandwidth,
    )


def inference_table(fit: RegressionFit, cov: CovarianceResult, level: float = 0.95,
                    names: Sequence[str] | None = None) -> list[InferenceRow]:
    """Normal-based t statistics, two-sided p values and confidence intervals.

    A zero standard error (including one clipped from a negative variance)
    gives ``None`` for the t statistic and p value and a degenerate interval.
    """
    if not 0.0 < level < 1.0:
        raise ValueError(f"level must lie in (0, 1), got {level}")
    names = list(names or fit.columns or [f"x{j + 1}" for j in range(fit.k)])
    z = stats.norm.ppf(0.5 * (1.0 + level))
    rows = []
    for j, name in enumerate(names):
        b = float(fit.beta_hat[j])
        se = float(cov.std_errors[j])
        if se > 0:
            t = b / se
            p = float(min(1.0, 2.0 * stats.norm.sf(abs(t))))
            lo, hi = b - z * se, b + z * se
        else:
            t = p = None
            lo = hi = b
        rows.append(InferenceRow(name, b, se, t, p, lo, hi, level,
                                 bool(cov.negative_variance_flags[j])))
    return rows


def wald_test(fit: RegressionFit, cov: CovarianceResult, R, r=None) -> WaldResult:
    """Wald statistic for ``R' beta = r`` with ``R`` of shape ``(k, m)``."""
    R = np.asarray(R, dtype=float)
    if R.ndim == 1:
        R = R[:, None]
    k, m = R.shape
    if k != fit.k or m > k:
        raise DimensionError(f"restriction matrix is {R.shape}, fit has k={fit.k}")
    r = np.zeros(m) if r is None else np.atleast_1d(np.asarray(r, dtype=float))
    if r.shape != (m,):
        raise DimensionError(f"r must have length {m}")
    d = R.T @ fit.beta_hat - r
    middle = R.T @ cov.v_hat @ R
    if not np.all(np.isfinite(middle)) or np.linalg.cond(middle) > CONDITION_LIMIT:
        raise SingularRestrictionError("R' V R is singular")
    w = float(d @ np.linalg.solve(middle, d))
    return WaldResult(statistic=w, df=m, p_value=float(stats.chi2.sf(w, m)))


@dataclass(frozen=True, eq=False)
class TimeEffectDiagnostics:
    gamma_hat: np.ndarray
    rho_hat: float


def time_effect_diagnostics(panel: BalancedPanel, column: str | int = "y") -> TimeEffectDiagnostics:
    """Estimated time effects of one column and their AR(1) coefficient.

    The column is demeaned within units, the cross-sectional mean of the
    result estimates the time effect up to location, and the first-order
    autoregression of that series (no intercept) gives ``rho_hat``.
    """
    if panel.n_units < 2 or panel.n_periods < 3:
        raise DegeneratePanelError(
            f"time-effect diagnostics need N >= 2 and T >= 3, got N={panel.n_units}, "
            f"T={panel.n_periods}"
        )
    if column == "y":
        v = panel.y
    else:
        j = panel.columns.index(column) if isinstance(column, str) else int(column)
        v = panel.x[:, :, j]
    demeaned = v - v.mean(axis=1, keepdims=True)
    gamma = demeaned.mean(axis=0)
    den = float(gamma[:-1] @ gamma[:-1])
    rho = float(gamma[:-1] @ gamma[1:]) / den if den > 0 else 0.0
    return TimeEffectDiagnostics(gamma_hat=gamma, rho_hat=rho)


def _fmt(value, spec: str = ".6g") -> str:
    if value is None:
        return "NA"
    return format(value, spec)


def format_table(rows: Sequence[InferenceRow]) -> str:
    if not rows:
        return ""
    pct = f"{100 * rows[0].level:g}%"
    header = ["", "estimate", "std.err", "t", "p>|t|", f"[{pct}", "CI]"]
    body = [
        [r.name, _fmt(r.estimate), _fmt(r.std_error), _fmt(r.t_stat, ".3f"),
         _fmt(r.p_value, ".4f"), _fmt(r.ci_lower), _fmt(r.ci_upper)]
        + (["(negative variance)"] if r.negative_variance else [])
        for r in rows
    ]
    widths = [max(len(line[c]) for line in [header] + body if c < len(line))
              for c in range(len(header))]
    lines = []
    for line in [header] + body:
        cells = [line[0].ljust(widths[0])]
        cells += [line[c].rjust(widths[c]) for c in range(1, len(header))]
        cells += line[len(header):]
        lines.append("  ".join(cells).rstrip())
    return "\n".join(lines)


def rows_to_csv(rows: Sequence[InferenceRow]) -> str:
    buf = io.StringIO()
    fields = ["name", "estimate", "std_error", "t_stat", "p_value",
              "ci_lower", "ci_upper", "level", "negative_variance"]
    writer = csv.DictWriter(buf, fieldnames=fields, lineterminator="\n")
    writer.writeheader()
    for r in rows:
        d = r.to_dict()
        writer.writerow({f: ("NA" if d[f] is None else repr(d[f]) if isinstance(d[f], float) else d[f])
                         for f in fields})
    return buf.getvalue()


def rows_to_json(rows: Sequence[InferenceRow]) -> str:
    return json.dumps([r.to_dict() for r in rows])
