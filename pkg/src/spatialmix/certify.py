"""Correlation-decay threshold gamma(d) and spectral SSM certificates."""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Optional

from scipy.optimize import minimize_scalar

from .branching import build_matrix, spectral_radius
from .lattice import Constraint, NeighborOrder

DEFAULT_MARGIN = 1e-6
MAX_D = 64
_BRACKET = (1e-6, 100.0)


@dataclass(frozen=True)
class Threshold:
    d: int
    gamma: float
    x_star: float


def g(x: float, d: int) -> float:
    """``[1 + (1+x)^d] (1+x) / (d x)`` for ``x > 0``."""
    return (1.0 + (1.0 + x) ** d) * (1.0 + x) / (d * x)


def g_prime(x: float, d: int) -> float:
    # d/dx log g = (d(1+x)^(d-1))/(1+(1+x)^d) + 1/(1+x) - 1/x
    a = (1.0 + x) ** d
    return g(x, d) * (d * a / ((1.0 + x) * (1.0 + a)) + 1.0 / (1.0 + x) - 1.0 / x)


def _stationary(x: float, d: int) -> float:
    """Zero exactly at the minimiser: ``(1+x)^d (d x - 1) - 1``."""
    return (1.0 + x) ** d * (d * x - 1.0) - 1.0


def _stationary_prime(x: float, d: int) -> float:
    return d * (1.0 + x) ** (d - 1) * (d * x - 1.0) + d * (1.0 + x) ** d


def gamma(d: int) -> Threshold:
    """Minimise ``g(., d)`` over ``x > 0``: golden-section search, then Newton.

    The stationarity condition reduces to ``(1+x)^d (d x - 1) = 1``, whose left
    side is increasing for ``x > 1/d``, so the polished root is the unique
    interior minimiser.
    """
    if not isinstance(d, int) or d < 1:
        raise ValueError(f"d must be a positive integer, got {d!r}")
    if d > MAX_D:
        raise ValueError(f"d={d} exceeds the supported maximum {MAX_D}")
    lo, hi = _BRACKET
    res = minimize_scalar(
        lambda x: g(x, d),
        bracket=(lo, 1.0 / d + 0.05, hi),
        method="golden",
        tol=1e-10,
    )
    x = float(res.x)
    for _ in range(50):
        step = _stationary(x, d) / _stationary_prime(x, d)
        x -= step
        if abs(step) < 1e-15 * max(1.0, x):
            break
    return Threshold(d, g(x, d), x)


class Verdict(str, enum.Enum):
    SSM_CERTIFIED = "SSM_CERTIFIED"
    INCONCLUSIVE = "INCONCLUSIVE"


@dataclass(frozen=True)
class Certificate:
    """One-sided: INCONCLUSIVE never asserts that SSM fails."""

    constraint: Constraint
    l: int
    ordered: bool
    lambda_star: float
    gamma: float
    verdict: Verdict
    order: Optional[str] = None

    def as_dict(self) -> dict:
        return {
            "cons": self.constraint.value,
            "l": self.l,
            "ordered": self.ordered,
            "lambdaStar": self.lambda_star,
            "gamma": self.gamma,
            "verdict": self.verdict.value,
        }


def decide(lambda_star: float, gamma_value: float, margin: float = DEFAULT_MARGIN) -> Verdict:
    return Verdict.SSM_CERTIFIED if lambda_star < gamma_value - margin else Verdict.INCONCLUSIVE


def certify(
    constraint: "Constraint | str",
    l: int,
    ordered: bool = True,
    order: Optional[NeighborOrder] = None,
    margin: float = DEFAULT_MARGIN,
) -> Certificate:
    constraint = Constraint.parse(constraint)
    bm = build_matrix(constraint, l, apply_order=ordered, order=order)
    lam = spectral_radius(bm).lambda_star
    thr = gamma(constraint.degree - 1)
    return Certificate(
        constraint=constraint,
        l=l,
        ordered=ordered,
        lambda_star=lam,
        gamma=thr.gamma,
        verdict=decide(lam, thr.gamma, margin),
        order=bm.order.spec() if bm.order else None,
    )
