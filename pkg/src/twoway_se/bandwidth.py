"""Lag truncation rules for the kernel-weighted two-way estimator.

The Andrews rule treats each column of the score time sums as an AR(1)
series and plugs the fitted coefficients into the Bartlett-kernel optimal
bandwidth formula. The Stock-Watson rule fixes the AR coefficient at 0.25.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Any

import numpy as np

from .variance import ClusterSums

__all__ = [
    "BandwidthRule",
    "BandwidthChoice",
    "AR1Estimate",
    "RHO_BOUND",
    "ANDREWS_CONSTANT",
    "ar1_coefficients",
    "andrews_m",
    "stock_watson_m",
    "fixed_m",
    "select_bandwidth",
]

RHO_BOUND = 0.97
ANDREWS_CONSTANT = 1.8171
STOCK_WATSON_CONSTANT = 0.75


class BandwidthRule(str, enum.Enum):
    ANDREWS = "ANDREWS"
    STOCK_WATSON = "STOCK_WATSON"
    FIXED = "FIXED"


@dataclass(frozen=True, eq=False)
class BandwidthChoice:
    m_value: float
    rule: BandwidthRule
    rho_hats: np.ndarray | None = None
    clamped: bool = False
    rho_clamped: tuple[bool, ...] = ()

    def __post_init__(self):
        if self.m_value < 0:
            raise ValueError("lag truncation must be nonnegative")
        if self.rule is BandwidthRule.STOCK_WATSON and self.rho_hats is not None:
            raise ValueError("Stock-Watson choices carry no AR coefficients")

    def to_dict(self) -> dict[str, Any]:
        return {
            "m_value": self.m_value,
            "rule": self.rule.value,
            "rho_hats": None if self.rho_hats is None else self.rho_hats.tolist(),
            "clamped": self.clamped,
            "rho_clamped": list(self.rho_clamped),
        }


@dataclass(frozen=True, eq=False)
class AR1Estimate:
    rho: np.ndarray       # clamped coefficients, one per regressor
    raw: np.ndarray       # unclamped least-squares slopes
    clamped: np.ndarray   # bool, |raw| exceeded the bound
    degenerate: np.ndarray  # bool, zero denominator, rho set to 0

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.rho, dtype=dtype)

    def __len__(self) -> int:
        return len(self.rho)

    def __getitem__(self, j):
        return self.rho[j]


def _time_sums(sums) -> np.ndarray:
    s = sums.s if isinstance(sums, ClusterSums) else np.asarray(sums, dtype=float)
    if s.ndim == 1:
        s = s[:, None]
    return s


def ar1_coefficients(sums: ClusterSums | np.ndarray, bound: float = RHO_BOUND) -> AR1Estimate:
    """No-intercept AR(1) slope of every column of the time sums.

    ``rho_j = sum_t S_{j,t-1} S_{jt} / sum_t S_{j,t-1}^2``, clipped to
    ``[-bound, bound]``. An all-zero lagged series gives ``rho_j = 0``.
    """
    S = _time_sums(sums)
    if S.shape[0] < 3:
        raise ValueError(f"AR(1) fit needs T >= 3, got T={S.shape[0]}")
    lagged, current = S[:-1], S[1:]
    num = (lagged * current).sum(axis=0)
    den = (lagged * lagged).sum(axis=0)
    degenerate = den == 0
    raw = np.where(degenerate, 0.0, num / np.where(degenerate, 1.0, den))
    clamped = np.abs(raw) > bound
    rho = np.clip(raw, -bound, bound)
    return AR1Estimate(rho=rho, raw=raw, clamped=clamped, degenerate=degenerate)


def _clamp(m: float, T: int) -> tuple[float, bool]:
    upper = max(T - 1, 0)
    if m > upper:
        return float(upper), True
    return max(float(m), 0.0), False


def andrews_m(rho_hats, T: int) -> BandwidthChoice:
    rho = np.atleast_1d(np.asarray(rho_hats, dtype=float))
    if np.any(np.abs(rho) > RHO_BOUND + 1e-12):
        raise ValueError(f"AR coefficients must satisfy |rho| <= {RHO_BOUND}")
    scale = (1.0 - rho) ** 4
    num = np.sum(rho**2 / scale)
    den = np.sum((1.0 - rho**2) ** 2 / scale)
    m = ANDREWS_CONSTANT * (num / den) ** (1.0 / 3.0) * T ** (1.0 / 3.0)
    m, clamped = _clamp(m, T)
    flags = tuple(bool(v) for v in getattr(rho_hats, "clamped", np.zeros(rho.size, bool)))
    return BandwidthChoice(m, BandwidthRule.ANDREWS, rho_hats=rho, clamped=clamped,
                           rho_clamped=flags)


def stock_watson_m(T: int) -> BandwidthChoice:
    m, clamped = _clamp(STOCK_WATSON_CONSTANT * T ** (1.0 / 3.0), T)
    return BandwidthChoice(m, BandwidthRule.STOCK_WATSON, clamped=clamped)


def fixed_m(m: float, T: int | None = None) -> BandwidthChoice:
    if T is None:
        return BandwidthChoice(float(m), BandwidthRule.FIXED)
    value, clamped = _clamp(m, T)
    return BandwidthChoice(value, BandwidthRule.FIXED, clamped=clamped)


def select_bandwidth(sums: ClusterSums, rule: BandwidthRule | str = BandwidthRule.ANDREWS,
                     m: float | None = None) -> BandwidthChoice:
    """Pick a lag truncation for the time sums in ``sums`` under ``rule``."""
    if not isinstance(rule, BandwidthRule):
        rule = BandwidthRule(rule.upper().replace("-", "_"))
    T = _time_sums(sums).shape[0]
    if rule is BandwidthRule.ANDREWS:
        return andrews_m(ar1_coefficients(sums), T)
    if rule is BandwidthRule.STOCK_WATSON:
        return stock_watson_m(T)
    if m is None:
        raise ValueError("fixed bandwidth rule needs a value for m")
    return fixed_m(m, T)
