"""Lattices for the four hard constraints and their finite induced regions.

A lattice point is a pair ``(i, j)`` of integers.  ``i`` is the slice index
swept by the transfer-matrix DP; ``j`` runs along a slice.  Every edge of every
lattice joins points whose first coordinates differ by at most one.

Compass names use ``E = (1, 0)`` and ``N = (0, 1)``.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Mapping, Sequence

Point = tuple[int, int]
Direction = tuple[int, int]

COMPASS: dict[str, Direction] = {
    "E": (1, 0),
    "NE": (1, 1),
    "N": (0, 1),
    "NW": (-1, 1),
    "W": (-1, 0),
    "SW": (-1, -1),
    "S": (0, -1),
    "SE": (1, -1),
}
DIRECTION_NAME: dict[Direction, str] = {d: n for n, d in COMPASS.items()}

# clockwise, starting at NW
DEFAULT_ORDER_SPEC = "NW,N,NE,E,SE,S,SW,W"
_CLOCKWISE = ["NW", "N", "NE", "E", "SE", "S", "SW", "W"]


class Constraint(enum.Enum):
    HS = "hs"
    HH = "hh"
    RWIM = "rwim"
    NAK = "nak"

    @classmethod
    def parse(cls, name: "str | Constraint") -> "Constraint":
        if isinstance(name, Constraint):
            return name
        try:
            return cls(name.strip().lower())
        except ValueError:
            raise ValueError(f"unknown constraint {name!r}; expected one of hs, hh, rwim, nak") from None

    @property
    def generators(self) -> tuple[Direction, ...]:
        """One direction from each +/- pair, as in the edge-set listing."""
        return _GENERATORS[self]

    @property
    def directions(self) -> tuple[Direction, ...]:
        gens = self.generators
        return gens + tuple((-a, -b) for a, b in gens)

    @property
    def degree(self) -> int:
        return len(self.directions)

    def __str__(self) -> str:
        return self.name


_GENERATORS: dict[Constraint, tuple[Direction, ...]] = {
    Constraint.HS: ((1, 0), (0, 1)),
    Constraint.HH: ((1, 0), (0, 1), (1, -1)),
    Constraint.RWIM: ((0, 1), (1, 1), (1, -1)),
    Constraint.NAK: ((1, 0), (0, 1), (1, 1), (1, -1)),
}


def neighbors(constraint: Constraint, point: Point) -> list[Point]:
    i, j = point
    return [(i + a, j + b) for a, b in constraint.directions]


def adjacent(constraint: Constraint, p: Point, q: Point) -> bool:
    return (q[0] - p[0], q[1] - p[1]) in _DIRSET[constraint]


_DIRSET = {c: frozenset(c.directions) for c in Constraint}


@dataclass(frozen=True)
class NeighborOrder:
    """Homogeneous ranking of a lattice's directions (rank 1 is smallest).

    The same ranking is used at every vertex, so ``u >_w v`` compares the
    ranks of ``u - w`` and ``v - w``.
    """

    constraint: Constraint
    rank: Mapping[Direction, int] = field(hash=False)

    def __post_init__(self) -> None:
        dirs = set(self.constraint.directions)
        if set(self.rank) != dirs:
            raise ValueError(f"order must rank exactly the {self.constraint} directions")
        if sorted(self.rank.values()) != list(range(1, len(dirs) + 1)):
            raise ValueError("ranks must be a bijection onto 1..degree")

    @classmethod
    def from_sequence(cls, constraint: Constraint, names: "Sequence[str] | str") -> "NeighborOrder":
        """Build from a direction list such as ``"NW,N,NE,E,SE,S,SW,W"``.

        Names that are not directions of ``constraint`` are skipped, so the
        eight-direction default also serves the six- and four-neighbour lattices.
        """
        if isinstance(names, str):
            names = [s for s in names.replace(" ", "").split(",") if s]
        dirs = set(constraint.directions)
        seq = []
        for name in names:
            key = name.upper()
            if key not in COMPASS:
                raise ValueError(f"unknown direction name {name!r}")
            d = COMPASS[key]
            if d in dirs and d not in seq:
                seq.append(d)
        if set(seq) != dirs:
            missing = sorted(DIRECTION_NAME[d] for d in dirs - set(seq))
            raise ValueError(f"order for {constraint} is missing directions {missing}")
        return cls(constraint, {d: k + 1 for k, d in enumerate(seq)})

    @classmethod
    def default(cls, constraint: Constraint) -> "NeighborOrder":
        return cls.from_sequence(constraint, DEFAULT_ORDER_SPEC)

    def sequence(self) -> list[Direction]:
        return sorted(self.rank, key=self.rank.__getitem__)

    def spec(self) -> str:
        return ",".join(DIRECTION_NAME[d] for d in self.sequence())

    def greater(self, w: Point, u: Point, v: Point) -> bool:
        """``u >_w v`` for two neighbours ``u, v`` of ``w``."""
        return self.rank[(u[0] - w[0], u[1] - w[1])] > self.rank[(v[0] - w[0], v[1] - w[1])]


def canonical_orders(constraint: Constraint) -> list[NeighborOrder]:
    """Rotations and reflections of the clockwise compass order, deduplicated.

    At most 16 candidates; fewer for lattices with six or four directions.
    """
    out: list[NeighborOrder] = []
    seen: set[tuple[Direction, ...]] = set()
    for seq in (_CLOCKWISE, _CLOCKWISE[::-1]):
        for r in range(len(seq)):
            order = NeighborOrder.from_sequence(constraint, seq[r:] + seq[:r])
            key = tuple(order.sequence())
            if key not in seen:
                seen.add(key)
                out.append(order)
    return out


@dataclass(frozen=True)
class FiniteRegion:
    """Induced subgraph of a lattice on an explicit finite vertex set."""

    constraint: Constraint
    vertices: frozenset[Point]

    def __post_init__(self) -> None:
        object.__setattr__(self, "vertices", frozenset((int(i), int(j)) for i, j in self.vertices))

    @classmethod
    def rectangle(cls, constraint: Constraint, m: int, n: int) -> "FiniteRegion":
        return induced_region(constraint, m, n)

    def __len__(self) -> int:
        return len(self.vertices)

    def __contains__(self, p: object) -> bool:
        return p in self.vertices

    def __iter__(self) -> Iterator[Point]:
        return iter(sorted(self.vertices))

    def neighbors(self, p: Point) -> list[Point]:
        return [q for q in neighbors(self.constraint, p) if q in self.vertices]

    def degree(self, p: Point) -> int:
        return len(self.neighbors(p))

    def edges(self) -> list[tuple[Point, Point]]:
        out = []
        for p in sorted(self.vertices):
            for a, b in self.constraint.generators:
                q = (p[0] + a, p[1] + b)
                if q in self.vertices:
                    out.append((p, q))
        return out

    def without(self, points: Iterable[Point]) -> "FiniteRegion":
        return FiniteRegion(self.constraint, self.vertices - frozenset(points))

    def bounding_box(self) -> tuple[int, int, int, int]:
        """``(imin, imax, jmin, jmax)``, inclusive."""
        if not self.vertices:
            return (0, -1, 0, -1)
        iis = [p[0] for p in self.vertices]
        jjs = [p[1] for p in self.vertices]
        return min(iis), max(iis), min(jjs), max(jjs)

    def adjacency(self) -> dict[Point, list[Point]]:
        return {p: self.neighbors(p) for p in sorted(self.vertices)}


def induced_region(constraint: Constraint, m: int, n: int) -> FiniteRegion:
    """The graph on ``[m] x [n]`` (0-based), edges truncated at the boundary."""
    if m <= 0 or n <= 0:
        raise ValueError(f"region dimensions must be positive, got {m}x{n}")
    return FiniteRegion(constraint, frozenset((i, j) for i in range(m) for j in range(n)))


def satisfies_constraint(constraint: Constraint, matrix: Sequence[Sequence[int]]) -> bool:
    """Check a 0/1 matrix against the forbidden-pattern definition directly.

    ``matrix[i][j]`` is the bit at lattice point ``(i, j)``.  Patterns are
    scanned as submatrices, independent of the edge-set tables above.
    """
    rows = len(matrix)
    cols = len(matrix[0]) if rows else 0
    patterns = _PATTERNS[constraint]
    for pat in patterns:
        pr, pc = len(pat), len(pat[0])
        for r in range(rows - pr + 1):
            for c in range(cols - pc + 1):
                if all(
                    matrix[r + a][c + b] == 1
                    for a in range(pr)
                    for b in range(pc)
                    if pat[a][b] == 1
                ):
                    return False
    return True


# Forbidden patterns written over (i, j) with i the row of the pattern array.
# Zeros in a pattern are "don't care" for independence: only the pair of ones matters.
_H = ((1, 1),)  # (i, j), (i, j+1)
_V = ((1,), (1,))  # (i, j), (i+1, j)
_ANTI = ((0, 1), (1, 0))  # (i, j+1), (i+1, j)
_DIAG = ((1, 0), (0, 1))  # (i, j), (i+1, j+1)
_PATTERNS = {
    Constraint.HS: (_H, _V),
    Constraint.HH: (_H, _V, _ANTI),
    Constraint.RWIM: (_H, _ANTI, _DIAG),
    Constraint.NAK: (_H, _V, _ANTI, _DIAG),
}
