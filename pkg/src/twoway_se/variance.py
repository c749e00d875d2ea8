"""Score-based estimators of the middle matrix of the OLS sandwich.

All estimators share the ``(NT)^-2`` normalization, so that
``Q^-1 Omega Q^-1`` is directly the covariance of the coefficient vector.
"""

from __future__ import annotations

import enum
import math
import warnings
from dataclasses import dataclass
from typing import Any

import numpy as np

from .errors import DimensionError, LagRangeError

__all__ = [
    "EstimatorKind",
    "WeightKind",
    "ScoreMatrix",
    "ClusterSums",
    "OmegaEstimate",
    "scores",
    "cluster_sums",
    "lag_cross_sums",
    "kernel_weight",
    "omega_ehw",
    "omega_cluster",
    "omega_cgm",
    "omega_thompson",
    "omega_chs",
    "evc",
]


class EstimatorKind(str, enum.Enum):
    EHW = "EHW"
    CR_I = "CR_I"
    CR_T = "CR_T"
    CGM = "CGM"
    THOMPSON = "THOMPSON"
    CHS = "CHS"


class WeightKind(str, enum.Enum):
    TRIANGULAR = "triangular"
    UNIFORM = "uniform"


@dataclass(frozen=True, eq=False)
class ScoreMatrix:
    """Per-observation scores ``s[i, t, j] = x[i, t, j] * u[i, t]``."""

    s: np.ndarray

    def __post_init__(self):
        s = np.array(self.s, dtype=float)
        if s.ndim == 2:
            s = s[:, :, None]
        if s.ndim != 3:
            raise DimensionError(f"scores must have shape (N, T, k), got {s.shape}")
        if not np.all(np.isfinite(s)):
            raise ValueError("scores must be finite")
        s.flags.writeable = False
        object.__setattr__(self, "s", s)

    @property
    def n_units(self) -> int:
        return self.s.shape[0]

    @property
    def n_periods(self) -> int:
        return self.s.shape[1]

    @property
    def k(self) -> int:
        return self.s.shape[2]

    @property
    def norm_factor(self) -> float:
        nt = self.n_units * self.n_periods
        return 1.0 / (nt * nt)


@dataclass(frozen=True, eq=False)
class ClusterSums:
    r: np.ndarray  # (N, k) firm sums
    s: np.ndarray  # (T, k) time sums


@dataclass(frozen=True, eq=False)
class OmegaEstimate:
    matrix: np.ndarray
    kind: EstimatorKind
    lag_truncation: float | None = None
    lag_window: int | None = None
    weight_kind: WeightKind | None = None
    evc_applied: bool = False
    clipped_eigenvalues: int = 0
    pre_evc_min_eigenvalue: float | None = None
    lag_clamped: bool = False

    @property
    def k(self) -> int:
        return self.matrix.shape[0]

    def to_dict(self) -> dict[str, Any]:
        return {
            "kind": self.kind.value,
            "matrix": self.matrix.tolist(),
            "lag_truncation": self.lag_truncation,
            "lag_window": self.lag_window,
            "weight_kind": None if self.weight_kind is None else self.weight_kind.value,
            "evc_applied": self.evc_applied,
            "clipped_eigenvalues": self.clipped_eigenvalues,
            "pre_evc_min_eigenvalue": self.pre_evc_min_eigenvalue,
            "lag_clamped": self.lag_clamped,
        }


def _as_scores(sc) -> ScoreMatrix:
    return sc if isinstance(sc, ScoreMatrix) else ScoreMatrix(sc)


def _symmetrize(a: np.ndarray) -> np.ndarray:
    return 0.5 * (a + a.T)


def scores(x, residuals) -> ScoreMatrix:
    """Elementwise scores from a design array ``(N, T, k)`` and residuals ``(N, T)``.

    Also accepts ``(panel, fit)``: the fit's own design is used then, which
    for the within estimator is the double-demeaned regressor array.
    """
    if hasattr(residuals, "design") and hasattr(residuals, "residuals"):
        x, residuals = residuals.design, residuals.residuals
    x = np.asarray(x, dtype=float)
    u = np.asarray(residuals, dtype=float)
    if x.ndim == 2:
        x = x[:, :, None]
    if x.ndim != 3 or u.shape != x.shape[:2]:
        raise DimensionError(
            f"residuals of shape {u.shape} do not match design of shape {x.shape}"
        )
    return ScoreMatrix(x * u[:, :, None])


def cluster_sums(sc: ScoreMatrix) -> ClusterSums:
    s = _as_scores(sc).s
    return ClusterSums(r=s.sum(axis=1), s=s.sum(axis=0))


def lag_cross_sums(sc: ScoreMatrix, sums: ClusterSums | None, m: int):
    """Lag-``m`` cross products of time sums (``g``) and of same-unit scores (``h``).

    ``g = sum_t S_t S_{t+m}'`` and ``h = sum_i sum_t s_it s_{i,t+m}'``. Neither
    is symmetric in general.
    """
    sc = _as_scores(sc)
    T = sc.n_periods
    if int(m) != m or not 1 <= m <= T - 1:
        raise LagRangeError(f"lag m={m} outside 1..{T - 1}")
    m = int(m)
    S = sc.s.sum(axis=0) if sums is None else sums.s
    g = S[:-m].T @ S[m:]
    h = np.einsum("itj,itl->jl", sc.s[:, :-m], sc.s[:, m:])
    return g, h


def kernel_weight(m: int, M: float, kind: WeightKind | str = WeightKind.TRIANGULAR) -> float:
    kind = WeightKind(kind)
    if m < 1 or m > math.floor(M):
        raise LagRangeError(f"lag m={m} outside the window 1..floor({M})")
    if kind is WeightKind.UNIFORM:
        return 1.0
    return 1.0 - m / (M + 1.0)


def omega_ehw(sc: ScoreMatrix) -> OmegaEstimate:
    sc = _as_scores(sc)
    flat = sc.s.reshape(-1, sc.k)
    return OmegaEstimate(sc.norm_factor * (flat.T @ flat), EstimatorKind.EHW)


def omega_cluster(sc: ScoreMatrix, axis: str = "unit") -> OmegaEstimate:
    sc = _as_scores(sc)
    if axis == "unit":
        sums, kind = sc.s.sum(axis=1), EstimatorKind.CR_I
    elif axis == "time":
        sums, kind = sc.s.sum(axis=0), EstimatorKind.CR_T
    else:
        raise ValueError(f"axis must be 'unit' or 'time', got {axis!r}")
    return OmegaEstimate(sc.norm_factor * (sums.T @ sums), kind)


def _cgm_matrix(sc: ScoreMatrix) -> np.ndarray:
    s = sc.s
    R = s.sum(axis=1)
    S = s.sum(axis=0)
    flat = s.reshape(-1, sc.k)
    return sc.norm_factor * (R.T @ R + S.T @ S - flat.T @ flat)


def omega_cgm(sc: ScoreMatrix) -> OmegaEstimate:
    sc = _as_scores(sc)
    return OmegaEstimate(_cgm_matrix(sc), EstimatorKind.CGM)


def _lag_sum(sc: ScoreMatrix, window: int, weights) -> np.ndarray:
    total = np.zeros((sc.k, sc.k))
    S = sc.s.sum(axis=0)
    sums = ClusterSums(r=sc.s.sum(axis=1), s=S)
    # ascending m keeps the floating-point summation order fixed
    for m in range(1, window + 1):
        g, h = lag_cross_sums(sc, sums, m)
        d = g - h
        total += weights(m) * (d + d.T)
    return sc.norm_factor * total


def omega_thompson(sc: ScoreMatrix, M: int = 2) -> OmegaEstimate:
    """Two-way cluster matrix plus unweighted lag terms up to lag ``M``."""
    sc = _as_scores(sc)
    if int(M) != M or M < 0:
        raise LagRangeError(f"Thompson lag M must be a nonnegative integer, got {M}")
    M = int(M)
    if M > sc.n_periods - 1:
        raise LagRangeError(f"Thompson lag M={M} requires T > M, got T={sc.n_periods}")
    matrix = _cgm_matrix(sc) + _lag_sum(sc, M, lambda m: 1.0)
    return OmegaEstimate(
        _symmetrize(matrix), EstimatorKind.THOMPSON,
        lag_truncation=float(M), lag_window=M, weight_kind=WeightKind.UNIFORM,
    )


def omega_chs(
    sc: ScoreMatrix,
    M: float,
    kind: WeightKind | str = WeightKind.TRIANGULAR,
    apply_evc: bool = True,
) -> OmegaEstimate:
    """Two-way cluster matrix plus kernel-weighted lag terms, then EVC.

    The lag window is ``1..floor(M)`` while the real ``M`` enters the
    triangular weight. A window longer than ``T - 1`` is shortened with a
    warning because ``M`` is often data driven.
    """
    sc = _as_scores(sc)
    kind = WeightKind(kind)
    M = float(M)
    if not math.isfinite(M) or M < 0:
        raise LagRangeError(f"lag truncation must be a finite nonnegative number, got {M}")
    window = math.floor(M)
    clamped = False
    if window > sc.n_periods - 1:
        warnings.warn(
            f"lag truncation {M:g} exceeds T-1={sc.n_periods - 1}; truncating the lag window",
            stacklevel=2,
        )
        window = sc.n_periods - 1
        clamped = True
    if kind is WeightKind.UNIFORM:
        weights = lambda m: 1.0  # noqa: E731
    else:
        weights = lambda m: 1.0 - m / (M + 1.0)  # noqa: E731
    raw = _symmetrize(_cgm_matrix(sc) + _lag_sum(sc, window, weights))

    common = dict(lag_truncation=M, lag_window=window, weight_kind=kind, lag_clamped=clamped)
    if not apply_evc:
        min_eig = float(np.linalg.eigvalsh(raw)[0])
        return OmegaEstimate(raw, EstimatorKind.CHS, pre_evc_min_eigenvalue=min_eig, **common)
    corrected, clipped, min_eig = evc(raw)
    return OmegaEstimate(
        corrected, EstimatorKind.CHS, evc_applied=True,
        clipped_eigenvalues=clipped, pre_evc_min_eigenvalue=min_eig, **common,
    )


def evc(matrix: np.ndarray) -> tuple[np.ndarray, int, float]:
    """Zero the negative eigenvalues of a symmetric matrix.

    Returns ``(corrected, n_clipped, min_eigenvalue_before)``. The result is
    the nearest positive semidefinite matrix in Frobenius norm. Inputs with
    no negative eigenvalue come back unchanged apart from symmetrization.
    """
    a = np.asarray(matrix, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise DimensionError(f"expected a square matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError("eigenvalue correction needs finite entries")
    a = _symmetrize(a)
    lam, vec = np.linalg.eigh(a)
    negative = lam < 0
    n_clipped = int(negative.sum())
    if n_clipped == 0:
        return a, 0, float(lam[0])
    corrected = (vec * np.where(negative, 0.0, lam)) @ vec.T
    return _symmetrize(corrected), n_clipped, float(lam[0])
