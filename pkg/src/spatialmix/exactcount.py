"""Exact independent-set counts and conditional marginals on finite regions.

Two independent routes are provided: :func:`count_bruteforce` enumerates
independent sets by backtracking, :func:`count_transfer` sweeps the region
slice by slice with a bitmask profile.  Counts are Python integers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Mapping, Optional

from .lattice import FiniteRegion, Point

Configuration = Mapping[Point, int]

BRUTEFORCE_MAX_FREE = 32
TRANSFER_MAX_HEIGHT = 30


class InfeasibleFixing(ValueError):
    """The fixed assignment admits no independent set."""


class RegionTooLarge(ValueError):
    pass


@dataclass(frozen=True)
class CountResult:
    count: int

    @property
    def log2count(self) -> float:
        if self.count <= 0:
            return float("-inf")
        # exact for huge ints, unlike math.log2(float(count))
        return math.log2(self.count)


def _check_fixing(region: FiniteRegion, fixed: Optional[Configuration]) -> dict[Point, int]:
    fixed = dict(fixed or {})
    for p, s in fixed.items():
        if p not in region:
            raise ValueError(f"fixed vertex {p} is not in the region")
        if s not in (0, 1):
            raise ValueError(f"fixed state for {p} must be 0 or 1, got {s!r}")
    for p, s in fixed.items():
        if s == 1:
            for q in region.neighbors(p):
                if fixed.get(q) == 1:
                    raise InfeasibleFixing(f"fixed occupied vertices {p} and {q} are adjacent")
    return fixed


def count_bruteforce(region: FiniteRegion, fixed: Optional[Configuration] = None) -> CountResult:
    """Count independent sets consistent with ``fixed`` by explicit enumeration."""
    fixed = _check_fixing(region, fixed)
    free = [p for p in sorted(region.vertices) if p not in fixed]
    if len(free) > BRUTEFORCE_MAX_FREE:
        raise RegionTooLarge(f"{len(free)} free vertices exceeds the enumeration limit {BRUTEFORCE_MAX_FREE}")
    occupied = {p for p, s in fixed.items() if s == 1}
    blocked = {q for p in occupied for q in region.neighbors(p)}
    index = {p: k for k, p in enumerate(free)}
    # neighbours of each free vertex that come earlier in the enumeration order
    earlier = [[index[q] for q in region.neighbors(p) if q in index and index[q] < k] for k, p in enumerate(free)]
    allowed = [p not in blocked for p in free]
    state = [0] * len(free)

    def rec(k: int) -> int:
        if k == len(free):
            return 1
        total = rec(k + 1)
        if allowed[k] and not any(state[e] for e in earlier[k]):
            state[k] = 1
            total += rec(k + 1)
            state[k] = 0
        return total

    return CountResult(rec(0))


def count_transfer(region: FiniteRegion, fixed: Optional[Configuration] = None) -> CountResult:
    """Count independent sets with a broken-profile DP over the bounding box.

    Cells are visited in raster order ``(i, j)``.  The profile holds the last
    ``h + 1`` decided bits, where ``h`` is the slice height, which covers every
    earlier neighbour a lattice edge can reach.  Points of the box missing from
    the region, and vertices fixed to 0, are forced to 0; vertices fixed to 1
    are forced to 1.
    """
    fixed = _check_fixing(region, fixed)
    if not region.vertices:
        return CountResult(1)
    imin, imax, jmin, jmax = region.bounding_box()
    h = jmax - jmin + 1
    if h > TRANSFER_MAX_HEIGHT:
        raise RegionTooLarge(f"slice height {h} exceeds the DP limit {TRANSFER_MAX_HEIGHT}")

    # earlier neighbour offsets expressed as profile bit positions
    back: list[tuple[int, int, int]] = []  # (di, dj, bit)
    for a, b in region.constraint.directions:
        # (i+a, j+b) precedes (i, j) in raster order
        if a < 0 or (a == 0 and b < 0):
            back.append((a, b, -(a * h + b) - 1))
    width = h + 1
    full = (1 << width) - 1

    states: dict[int, int] = {0: 1}
    for i in range(imin, imax + 1):
        for j in range(jmin, jmax + 1):
            p = (i, j)
            present = p in region.vertices
            forced = fixed.get(p, None if present else 0)
            conflict_mask = 0
            for a, b, bit in back:
                jj = j + b
                if jmin <= jj <= jmax:
                    conflict_mask |= 1 << bit
            nxt: dict[int, int] = {}
            for s, c in states.items():
                base = (s << 1) & full
                if forced != 1:
                    nxt[base] = nxt.get(base, 0) + c
                if forced != 0 and not (s & conflict_mask):
                    key = base | 1
                    nxt[key] = nxt.get(key, 0) + c
            states = nxt
    total = sum(states.values())
    if total == 0:
        raise InfeasibleFixing("no independent set is consistent with the fixing")
    return CountResult(total)


def _is_rectangular_enough(region: FiniteRegion) -> bool:
    imin, imax, jmin, jmax = region.bounding_box()
    return jmax - jmin + 1 <= TRANSFER_MAX_HEIGHT


def count(region: FiniteRegion, fixed: Optional[Configuration] = None) -> CountResult:
    """Dispatch to the DP when the slice height allows, else enumerate."""
    if _is_rectangular_enough(region):
        return count_transfer(region, fixed)
    return count_bruteforce(region, fixed)


def marginal_unoccupied(region: FiniteRegion, v: Point, fixed: Optional[Configuration] = None) -> Fraction:
    """Exact ``Pr[sigma_v = 0 | fixed]`` under the uniform measure."""
    fixed = dict(fixed or {})
    if v not in region:
        raise ValueError(f"vertex {v} is not in the region")
    if v in fixed:
        raise ValueError(f"vertex {v} is already fixed")
    z = count(region, fixed).count
    fixed[v] = 0
    z0 = count(region, fixed).count
    return Fraction(z0, z)
