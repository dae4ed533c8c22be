"""Capacity of the constraints through the sequential-cavity marginal.

For a ``(2t+1) x (2t+1)`` square, every vertex preceding the centre in raster
order is fixed unoccupied (equivalently removed) and ``p_t`` is the marginal
that the centre is unoccupied.  Under strong spatial mixing
``log2(1/p_t)`` converges to the capacity.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .exactcount import TRANSFER_MAX_HEIGHT, count_transfer
from .lattice import Constraint, FiniteRegion, Point, induced_region

# constraints with a decay certificate; the NAK estimate is reported uncertified
CERTIFIED = frozenset({Constraint.HS, Constraint.HH, Constraint.RWIM})
DEFAULT_T_MAX = 8


@dataclass(frozen=True)
class CavityInstance:
    constraint: Constraint
    t: int

    @property
    def size(self) -> int:
        return 2 * self.t + 1

    @property
    def center(self) -> Point:
        return (self.t, self.t)

    @property
    def region(self) -> FiniteRegion:
        return induced_region(self.constraint, self.size, self.size)

    @property
    def q(self) -> frozenset[Point]:
        """Raster predecessors of the centre: slices ``0..t-1`` and the first ``t`` cells of slice ``t``."""
        t, n = self.t, self.size
        return frozenset([(k, j) for k in range(t) for j in range(n)] + [(t, j) for j in range(t)])


def cavity_marginal(constraint: "Constraint | str", t: int) -> Fraction:
    """``p_t = Z(R - Q - centre) / Z(R - Q)``, exactly."""
    constraint = Constraint.parse(constraint)
    if t < 1:
        raise ValueError("t must be at least 1")
    if 2 * t + 1 > TRANSFER_MAX_HEIGHT:
        raise ValueError(f"t={t} exceeds the DP height limit")
    inst = CavityInstance(constraint, t)
    base = inst.region.without(inst.q)
    z = count_transfer(base).count
    z0 = count_transfer(base.without([inst.center])).count
    return Fraction(z0, z)


@dataclass
class CapacityEstimate:
    constraint: Constraint
    t: int
    p_t: Fraction
    estimate: float
    delta_from_prev: float
    series: list[float] = field(default_factory=list)
    converged: bool = True
    certified: bool = True

    def as_dict(self) -> dict:
        return {
            "t": self.t,
            "p_t": float(self.p_t),
            "estimate": self.estimate,
            "series": list(self.series),
            "certified": self.certified,
            "converged": self.converged,
        }


def estimate_capacity(
    constraint: "Constraint | str",
    epsilon: float = 1e-3,
    t_max: int = DEFAULT_T_MAX,
) -> CapacityEstimate:
    """Grow ``t`` until successive estimates differ by at most ``epsilon``.

    The stopping rule is empirical; it is only meaningful for constraints with
    a decay certificate.  If ``t_max`` is reached first the partial series is
    returned with ``converged=False``.
    """
    constraint = Constraint.parse(constraint)
    if not 0 < epsilon < 1:
        raise ValueError("epsilon must lie in (0, 1)")
    series: list[float] = []
    p = Fraction(1)
    delta = math.inf
    for t in range(1, t_max + 1):
        p = cavity_marginal(constraint, t)
        series.append(math.log2(1 / p))
        if t > 1:
            delta = abs(series[-1] - series[-2])
            if delta <= epsilon:
                break
    return CapacityEstimate(
        constraint=constraint,
        t=len(series),
        p_t=p,
        estimate=series[-1],
        delta_from_prev=delta,
        series=series,
        converged=delta <= epsilon,
        certified=constraint in CERTIFIED,
    )


def capacity_bounds_bruteforce(constraint: "Constraint | str", maxmn: int) -> dict[tuple[int, int], float]:
    """``log2(N_{m,n}) / (m n)`` for all ``1 <= m, n <= maxmn``."""
    constraint = Constraint.parse(constraint)
    if maxmn > TRANSFER_MAX_HEIGHT:
        raise ValueError(f"maxmn={maxmn} exceeds the DP height limit")
    out = {}
    for m in range(1, maxmn + 1):
        for n in range(1, maxmn + 1):
            out[(m, n)] = count_transfer(induced_region(constraint, m, n)).log2count / (m * n)
    return out


def _column_states(height: int) -> list[int]:
    # every lattice has the in-slice edge (0, 1)
    return [s for s in range(1 << height) if not (s & (s >> 1))]


def column_transfer_matrix(constraint: "Constraint | str", height: int) -> np.ndarray:
    """0/1 compatibility of consecutive slices of a strip of the given height."""
    constraint = Constraint.parse(constraint)
    states = np.array(_column_states(height), dtype=np.int64)
    full = (1 << height) - 1
    ok = np.ones((len(states), len(states)), dtype=bool)
    s = states[:, None]
    for a, b in constraint.generators:
        if a == 0:
            continue
        # a == 1: bit j of one slice meets bit j + b of the next
        nxt = states[None, :]
        shifted = (nxt >> b) if b >= 0 else ((nxt << -b) & full)
        ok &= (s & shifted) == 0
    return ok.astype(np.float64)


def strip_growth(constraint: "Constraint | str", height: int, n: int = 1000) -> float:
    """``log2`` of the per-slice growth of strip counts, from ``n`` normalised steps."""
    t = column_transfer_matrix(constraint, height)
    v = np.ones(t.shape[0])
    growth = 1.0
    for _ in range(n):
        w = t @ v
        growth = w.max() / v.max()
        v = w / w.max()
    return math.log2(growth)


def strip_capacity(constraint: "Constraint | str", height: int = 14, n: int = 1000, step: int = 1) -> float:
    """Capacity estimate from strips: the per-row gain from adding ``step`` rows to a tall strip.

    ``step=2`` cancels the parity oscillation seen for RWIM.
    """
    return (strip_growth(constraint, height, n) - strip_growth(constraint, height - step, n)) / step
