"""Edge statistics from controller trials.

The success-probability lower bound is ``max(p_hat - s * z, 0)`` with
``z = inv_norm_cdf(gamma)``.  In ``"verbatim"`` mode ``s`` is the per-trial
standard deviation of the success indicators; in ``"standard_error"`` mode it
is that deviation divided by ``sqrt(T)``, the standard error of ``p_hat``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

VERBATIM = "verbatim"
STANDARD_ERROR = "standard_error"
BOUND_MODES = (VERBATIM, STANDARD_ERROR)

# Acklam's rational approximation, relative error 1.15e-9 before refinement.
_A = (-3.969683028665376e01, 2.209460984245205e02, -2.759285104469687e02,
      1.383577518672690e02, -3.066479806614716e01, 2.506628277459239e00)
_B = (-5.447609879822406e01, 1.615858368580409e02, -1.556989798598866e02,
      6.680131188771972e01, -1.328068155288572e01)
_C = (-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e00,
      -2.549732539343734e00, 4.374664141464968e00, 2.938163982698783e00)
_D = (7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e00,
      3.754408661907416e00)
_P_LOW = 0.02425


def norm_cdf(x: float) -> float:
    return 0.5 * math.erfc(-x / math.sqrt(2.0))


def _check_unit_open(name, value):
    value = float(value)
    if not 0.0 < value < 1.0:
        raise ValueError(f"{name} must lie in (0, 1), got {value}")
    return value


def inv_norm_cdf(gamma: float) -> float:
    """Standard normal quantile.

    Acklam's approximation followed by one Halley step against
    ``math.erfc``; the result satisfies ``|Phi(x) - gamma| <= 1e-8`` and is
    antisymmetric, ``inv_norm_cdf(1 - g) == -inv_norm_cdf(g)``.
    """
    p = _check_unit_open("gamma", gamma)
    if p > 0.5:
        return -inv_norm_cdf(1.0 - p)
    if p == 0.5:
        return 0.0
    if p < _P_LOW:
        q = math.sqrt(-2.0 * math.log(p))
        x = (((((_C[0] * q + _C[1]) * q + _C[2]) * q + _C[3]) * q + _C[4]) * q + _C[5]) / (
            (((_D[0] * q + _D[1]) * q + _D[2]) * q + _D[3]) * q + 1.0
        )
    else:
        q = p - 0.5
        r = q * q
        x = (((((_A[0] * r + _A[1]) * r + _A[2]) * r + _A[3]) * r + _A[4]) * r + _A[5]) * q / (
            ((((_B[0] * r + _B[1]) * r + _B[2]) * r + _B[3]) * r + _B[4]) * r + 1.0
        )
    e = norm_cdf(x) - p
    u = e * math.sqrt(2.0 * math.pi) * math.exp(0.5 * x * x)
    return x - u / (1.0 + 0.5 * x * u)


@dataclass(frozen=True)
class EdgeStats:
    """Summary of ``T`` trials along one directed edge.

    ``c_hat`` is ``None`` when no trial succeeded; such an edge carries no
    cost estimate and must be treated as absent.
    """

    T: int
    T_success: int
    p_hat: float
    c_hat: Optional[float]
    sigma2_hat: float
    p_lower: float
    gamma: float
    mode: str = VERBATIM

    def to_dict(self) -> dict:
        return {
            "T": self.T,
            "T_success": self.T_success,
            "c_hat": self.c_hat,
            "gamma": self.gamma,
            "p_lower": self.p_lower,
            "p_hat": self.p_hat,
            "sigma2_hat": self.sigma2_hat,
            "mode": self.mode,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "EdgeStats":
        return cls(
            T=int(d["T"]),
            T_success=int(d["T_success"]),
            p_hat=float(d["p_hat"]),
            c_hat=None if d["c_hat"] is None else float(d["c_hat"]),
            sigma2_hat=float(d["sigma2_hat"]),
            p_lower=float(d["p_lower"]),
            gamma=float(d["gamma"]),
            mode=d.get("mode", VERBATIM),
        )


def success_variance(T: int, T_success: int) -> float:
    """``(T_success * (1 - 2 p) + T p**2) / (T - 1)``; 0 when ``T == 1``."""
    if T < 2:
        return 0.0
    p = T_success / T
    v = (T_success * (1.0 - 2.0 * p) + T * p * p) / (T - 1)
    return max(v, 0.0)


def lower_bound(T: int, T_success: int, gamma: float, mode: str = VERBATIM) -> float:
    """Reliability-``gamma`` lower confidence bound on the success probability.

    Clipped to ``[0, 1]``.  For ``gamma < 0.5`` the quantile is negative and
    the "bound" sits above ``p_hat``.
    """
    if mode not in BOUND_MODES:
        raise ValueError(f"mode must be one of {BOUND_MODES}, got {mode!r}")
    z = inv_norm_cdf(gamma)
    p = T_success / T
    s = math.sqrt(success_variance(T, T_success))
    if mode == STANDARD_ERROR:
        s /= math.sqrt(T)
    return min(max(p - s * z, 0.0), 1.0)


def edge_stats_from_counts(T: int, T_success: int, cost_sum: float, gamma: float,
                           mode: str = VERBATIM) -> EdgeStats:
    T = int(T)
    T_success = int(T_success)
    if T < 1:
        raise ValueError("need at least one trial")
    if not 0 <= T_success <= T:
        raise ValueError("T_success must lie in [0, T]")
    gamma = _check_unit_open("gamma", gamma)
    return EdgeStats(
        T=T,
        T_success=T_success,
        p_hat=T_success / T,
        c_hat=cost_sum / T_success if T_success else None,
        sigma2_hat=success_variance(T, T_success),
        p_lower=lower_bound(T, T_success, gamma, mode),
        gamma=gamma,
        mode=mode,
    )


def edge_stats(outcomes: Sequence, gamma: float = 0.95, mode: str = VERBATIM) -> EdgeStats:
    """Summarize a list of :class:`~robustplan.controller.TrialOutcome`."""
    if len(outcomes) == 0:
        raise ValueError("need at least one trial outcome")
    successes = [o for o in outcomes if o.success]
    return edge_stats_from_counts(len(outcomes), len(successes), sum(o.cost for o in successes), gamma, mode)
