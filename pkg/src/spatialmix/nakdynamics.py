"""Ratio dynamics on the two-type subtree of the non-attacking-kings SAW tree.

The subtree never steps south-west, south or south-east, never reverses, and
never turns east right after a north-west or north step.  Lumping its types
leaves two recurrent classes: X (four-child types, ratio ``x``) and Y (type
NE, ratio ``y``).  Their ratios obey ``x' = F1(x, y)``, ``y' = F2(x, y)``.
"""

from __future__ import annotations

import enum
import functools
import math
import random
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.optimize import brentq

from .branching import BranchingMatrix, survives_in_saw_tree
from .lattice import COMPASS, Constraint, NeighborOrder

X_UPPER = 0.3356
Y_UPPER = 0.2513

SUBTREE_LABELS = ["O", "W", "NW", "N", "NE", "E"]
SUBTREE_ROWS = [
    [0, 1, 1, 1, 1, 1],
    [0, 1, 1, 1, 1, 0],
    [0, 1, 1, 1, 1, 0],
    [0, 1, 1, 1, 1, 0],
    [0, 1, 1, 1, 1, 1],
    [0, 0, 1, 1, 1, 1],
]
# lumping {O}, {W, NW, N, E}, {NE}
SUBTREE_PARTITION = [["O"], ["W", "NW", "N", "E"], ["NE"]]
SUBTREE_LUMPED = [[0, 4, 1], [0, 3, 1], [0, 4, 1]]


def subtree_matrix() -> BranchingMatrix:
    """The six-type matrix; a child's type is the direction of its last step."""
    rows, cols = np.nonzero(np.array(SUBTREE_ROWS))
    n = len(SUBTREE_LABELS)
    mat = sp.csr_matrix((np.ones(len(rows), dtype=np.int64), (rows, cols)), shape=(n, n))
    transitions = {(int(i), COMPASS[SUBTREE_LABELS[j]]): int(j) for i, j in zip(rows, cols)}
    return BranchingMatrix(
        labels=list(SUBTREE_LABELS),
        matrix=mat,
        transitions=transitions,
        constraint=Constraint.NAK,
        order=NeighborOrder.default(Constraint.NAK),
    )


def F1(x: float, y: float) -> float:
    if math.isinf(x) or math.isinf(y):
        return 0.0
    return 1.0 / ((1.0 + x) ** 3 * (1.0 + y))


def F2(x: float, y: float) -> float:
    if math.isinf(x) or math.isinf(y):
        return 0.0
    return 1.0 / ((1.0 + x) ** 4 * (1.0 + y))


def F_root(x: float, y: float) -> float:
    """Ratio at the root type, whose children are four X and one Y."""
    return F2(x, y)


def F1_hat(x: float) -> float:
    """Zero exactly at the fixed-point value of ``x``; increasing on ``x > 0``."""
    return x / (1.0 + x) - 1.0 / (x * (1.0 + x) ** 3) + 1.0


def F1_hat_prime(x: float) -> float:
    return 1.0 / (1.0 + x) ** 2 + (1.0 + 4.0 * x) / (x**2 * (1.0 + x) ** 4)


def F2_hat(y: float) -> float:
    """Zero exactly at the fixed-point value of ``y``; increasing on ``y > 0``."""
    return (y**3 / (1.0 + y)) ** 0.25 - (1.0 / (y * (1.0 + y))) ** 0.25 + 1.0


def jacobian(x: float, y: float) -> np.ndarray:
    """Absolute partial derivatives of ``(F1, F2)``; every entry decreases in x and y."""
    return np.array(
        [
            [3.0 / ((1 + x) ** 4 * (1 + y)), 1.0 / ((1 + x) ** 3 * (1 + y) ** 2)],
            [4.0 / ((1 + x) ** 5 * (1 + y)), 1.0 / ((1 + x) ** 4 * (1 + y) ** 2)],
        ]
    )


def perron_2x2(j: np.ndarray) -> float:
    tr = j[0, 0] + j[1, 1]
    det = j[0, 0] * j[1, 1] - j[0, 1] * j[1, 0]
    return float(0.5 * (tr + math.sqrt(tr * tr - 4.0 * det)))


class Stability(str, enum.Enum):
    REPELLING = "REPELLING"
    ATTRACTING = "ATTRACTING"


@dataclass(frozen=True)
class FixedPointReport:
    xhat: float
    yhat: float
    delta1: float
    delta2: float
    jacobian: np.ndarray
    lambda_star: float
    verdict: Stability

    def as_dict(self) -> dict:
        return {
            "xhat": self.xhat,
            "yhat": self.yhat,
            "delta1": self.delta1,
            "delta2": self.delta2,
            "jacobian": self.jacobian.tolist(),
            "lambdaStar": self.lambda_star,
            "verdict": self.verdict.value,
        }


def solve_fixed_point() -> FixedPointReport:
    """Solve the one-dimensional reduction, then set ``y = x/(1+x)``."""
    lo, hi = 1e-3, X_UPPER
    if not (F1_hat(lo) < 0 < F1_hat(hi)):
        raise RuntimeError("fixed-point bracket failed")
    x = brentq(F1_hat, lo, hi, xtol=1e-15, rtol=1e-15)
    for _ in range(3):
        x -= F1_hat(x) / F1_hat_prime(x)
    y = x / (1.0 + x)
    jac = jacobian(x, y)
    lam = perron_2x2(jac)
    return FixedPointReport(
        xhat=x,
        yhat=y,
        delta1=F1(x, y) - x,
        delta2=F2(x, y) - y,
        jacobian=jac,
        lambda_star=lam,
        verdict=Stability.REPELLING if lam > 1.0 else Stability.ATTRACTING,
    )


def _root_ratio(x: float, y: float, root_type: str) -> float:
    if root_type == "X":
        return F1(x, y)
    if root_type == "Y":
        return F2(x, y)
    if root_type == "O":
        return F_root(x, y)
    raise ValueError(f"root type must be X, Y or O, got {root_type!r}")


def iterate_gap(depth: int, root_type: str = "X") -> list[float]:
    """``|p+ - p-|`` at the root for boundaries 1..depth levels below it.

    ``p`` is the probability that the root is unoccupied.  Entry ``k-1`` uses
    a boundary at distance ``k``, fixed all-unoccupied versus all-occupied.
    """
    if depth < 1:
        raise ValueError("depth must be at least 1")
    lo = (0.0, 0.0)
    hi = (math.inf, math.inf)
    gaps = []
    for _ in range(depth):
        p_lo = 1.0 / (1.0 + _root_ratio(*lo, root_type))
        p_hi = 1.0 / (1.0 + _root_ratio(*hi, root_type))
        gaps.append(abs(p_lo - p_hi))
        lo = (F1(*lo), F2(*lo))
        hi = (F1(*hi), F2(*hi))
    return gaps


@functools.lru_cache(maxsize=1)
def _successors() -> dict[int, list]:
    by_state: dict[int, list] = {}
    for (i, d), j in subtree_matrix().transitions.items():
        by_state.setdefault(i, []).append((d, j))
    return {i: sorted(v) for i, v in by_state.items()}


def random_subtree_walk(length: int, rng: random.Random) -> tuple:
    by_state = _successors()
    state = 0
    steps = []
    for _ in range(length):
        d, state = rng.choice(by_state[state])
        steps.append(d)
    return tuple(steps)


@dataclass(frozen=True)
class SubtreeCheck:
    ok: bool
    trials: int
    counterexample: tuple | None = None

    def __bool__(self) -> bool:
        return self.ok


def check_subtree_property(
    trials: int = 10_000,
    walk_len: int = 20,
    order: NeighborOrder | None = None,
    seed: int = 0,
) -> SubtreeCheck:
    """Every walk generated by the subtree matrix must survive in the NAK SAW tree."""
    order = order or NeighborOrder.default(Constraint.NAK)
    rank = order.rank
    if [rank[COMPASS[n]] for n in ("NW", "N", "NE")] != [1, 2, 3]:
        raise ValueError("the order must rank NW, N, NE as 1, 2, 3")
    rng = random.Random(seed)
    for _ in range(trials):
        steps = random_subtree_walk(rng.randint(1, walk_len), rng)
        if not survives_in_saw_tree(steps, Constraint.NAK, order):
            return SubtreeCheck(False, trials, steps)
    return SubtreeCheck(True, trials)
