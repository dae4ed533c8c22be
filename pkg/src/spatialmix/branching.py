"""Branching matrices whose multi-type trees bracket the SAW tree of a lattice.

A type is a step sequence (a suffix of the walk that reached a node).  The
unordered construction keeps every walk that avoids cycles of length at most
``l``; a node's type is the longest suffix of its walk that occurs as a run of
consecutive steps in some such cycle.  The ordered construction additionally
drops types whose walk closes a short cycle from above in the neighbour order,
mirroring the pruning of the SAW tree.
"""

from __future__ import annotations

import functools
import random
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

import numpy as np
import scipy.sparse as sp

from .lattice import DIRECTION_NAME, COMPASS, Constraint, Direction, NeighborOrder, canonical_orders

Steps = tuple[Direction, ...]
ROOT_LABEL = "O"

MIN_CYCLE_BOUND = 3
MAX_CYCLE_BOUND = 10


class NotLumpable(ValueError):
    pass


class NoConvergence(RuntimeError):
    pass


def label_of(steps: Steps) -> str:
    return ".".join(DIRECTION_NAME[d] for d in steps) if steps else ROOT_LABEL


def steps_of(label: str) -> Steps:
    if label == ROOT_LABEL:
        return ()
    return tuple(COMPASS[name] for name in label.split("."))


def walk_vertices(steps: Iterable[Direction]) -> list[tuple[int, int]]:
    p = (0, 0)
    out = [p]
    for a, b in steps:
        p = (p[0] + a, p[1] + b)
        out.append(p)
    return out


def _check_bound(l: int) -> None:
    if not MIN_CYCLE_BOUND <= l <= MAX_CYCLE_BOUND:
        raise ValueError(f"cycle bound l={l} outside [{MIN_CYCLE_BOUND}, {MAX_CYCLE_BOUND}]")


def enumerate_cycles(constraint: Constraint, l: int) -> set[Steps]:
    """All closed self-avoiding walks of length 3..l starting at the origin.

    Every starting direction and both orientations appear, so each geometric
    cycle through the origin is listed once per (orientation, position).
    """
    constraint = Constraint.parse(constraint)
    _check_bound(l)
    dirs = constraint.directions
    found: set[Steps] = set()
    path: list[Direction] = []
    visited = {(0, 0)}

    def rec(pos: tuple[int, int]) -> None:
        if len(path) >= l:
            return
        for d in dirs:
            q = (pos[0] + d[0], pos[1] + d[1])
            if q == (0, 0):
                if len(path) + 1 >= 3:
                    found.add(tuple(path) + (d,))
                continue
            if q in visited:
                continue
            visited.add(q)
            path.append(d)
            rec(q)
            path.pop()
            visited.remove(q)

    rec((0, 0))
    return found


def subwalk_set(cycles: Iterable[Steps]) -> set[Steps]:
    """Every nonempty run of consecutive steps of every cycle."""
    out: set[Steps] = set()
    for c in cycles:
        n = len(c)
        for i in range(n):
            for j in range(i + 1, n + 1):
                out.add(tuple(c[i:j]))
    return out


@dataclass
class BranchingMatrix:
    """Nonnegative integer matrix; type 0 is the root.

    ``transitions`` maps ``(type, direction)`` to the child type for matrices
    generated from lattice walks; it is ``None`` for lumped matrices.
    """

    labels: list[str]
    matrix: sp.csr_matrix
    transitions: Optional[dict[tuple[int, Direction], int]] = None
    constraint: Optional[Constraint] = None
    l: Optional[int] = None
    ordered: bool = False
    order: Optional[NeighborOrder] = None
    meta: dict = field(default_factory=dict)

    @property
    def ntypes(self) -> int:
        """Type count including the root type."""
        return len(self.labels)

    @property
    def ntypes_without_root(self) -> int:
        return len(self.labels) - 1

    def reachable(self) -> list[int]:
        """Types reachable from the root, in index order."""
        seen = {0}
        stack = [0]
        m = self.matrix
        while stack:
            i = stack.pop()
            for j in m.indices[m.indptr[i] : m.indptr[i + 1]]:
                j = int(j)
                if j not in seen:
                    seen.add(j)
                    stack.append(j)
        return sorted(seen)

    @property
    def ntypes_reachable(self) -> int:
        return len(self.reachable())

    def dense(self) -> np.ndarray:
        return self.matrix.toarray()

    def index(self, label: str) -> int:
        return self.labels.index(label)

    def row_sums(self) -> np.ndarray:
        return np.asarray(self.matrix.sum(axis=1)).ravel()

    def restrict(self, keep: Sequence[int]) -> "BranchingMatrix":
        """Delete every type not in ``keep`` (rows and columns)."""
        keep = sorted(keep)
        if keep[0] != 0:
            raise ValueError("the root type cannot be deleted")
        new_index = {old: new for new, old in enumerate(keep)}
        sub = self.matrix[keep][:, keep].tocsr()
        trans = None
        if self.transitions is not None:
            trans = {
                (new_index[i], d): new_index[j]
                for (i, d), j in self.transitions.items()
                if i in new_index and j in new_index
            }
        return BranchingMatrix(
            labels=[self.labels[k] for k in keep],
            matrix=sub,
            transitions=trans,
            constraint=self.constraint,
            l=self.l,
            ordered=self.ordered,
            order=self.order,
            meta=dict(self.meta),
        )

    def accepts(self, steps: Iterable[Direction]) -> bool:
        """Does the generated tree contain the walk with these steps?"""
        if self.transitions is None:
            raise ValueError("lumped matrices carry no step labels")
        state = 0
        for d in steps:
            nxt = self.transitions.get((state, d))
            if nxt is None:
                return False
            state = nxt
        return True


@functools.lru_cache(maxsize=None)
def _unordered(constraint: Constraint, l: int) -> tuple[tuple[Steps, ...], tuple[tuple[int, Direction, int], ...]]:
    subwalks = subwalk_set(enumerate_cycles(constraint, l))
    if not subwalks:
        raise ValueError(f"no cycles of length <= {l} in the {constraint} lattice")
    dirs = constraint.directions
    types: list[Steps] = [()]
    index: dict[Steps, int] = {(): 0}
    edges: list[tuple[int, Direction, int]] = []
    head = 0
    # breadth-first, so numbering is deterministic
    while head < len(types):
        t = types[head]
        verts = walk_vertices(t)
        end = verts[-1]
        occupied = set(verts)
        for d in dirs:
            q = (end[0] + d[0], end[1] + d[1])
            if q in occupied:
                continue
            w = t + (d,)
            k = len(w)
            while k and w[len(w) - k :] not in subwalks:
                k -= 1
            if not k:
                raise ValueError(f"step {DIRECTION_NAME[d]} lies on no cycle of length <= {l}")
            child = w[len(w) - k :]
            j = index.get(child)
            if j is None:
                j = index[child] = len(types)
                types.append(child)
            edges.append((head, d, j))
        head += 1
    return tuple(types), tuple(edges)


def _closure_pairs(steps: Steps, constraint: Constraint, l: int) -> list[tuple[Direction, Direction]]:
    """For each earlier vertex ``u0`` of the walk that is adjacent to its end
    through a cycle of length <= l: (direction u0 -> end, first step out of u0)."""
    verts = walk_vertices(steps)
    m = len(verts) - 1
    end = verts[-1]
    dirs = set(constraint.directions)
    out = []
    for a in range(0, m - 1):
        u0 = verts[a]
        diff = (end[0] - u0[0], end[1] - u0[1])
        if diff in dirs and (m - a) + 1 <= l:
            out.append((diff, steps[a]))
    return out


def closes_from_above(steps: Steps, constraint: Constraint, l: int, order: NeighborOrder) -> bool:
    rank = order.rank
    return any(rank[diff] > rank[first] for diff, first in _closure_pairs(steps, constraint, l))


def build_matrix(
    constraint: "Constraint | str",
    l: int,
    apply_order: bool = False,
    order: Optional[NeighborOrder] = None,
    reclose: bool = False,
) -> BranchingMatrix:
    """Generate the unordered matrix, or the ordered one when ``apply_order``.

    The ordered matrix deletes the rows and columns of offending types from the
    unordered one.  With ``reclose`` it also drops types no longer reachable
    from the root; the spectral radius is the same either way.
    """
    constraint = Constraint.parse(constraint)
    _check_bound(l)
    types, edges = _unordered(constraint, l)
    n = len(types)
    rows = [i for i, _, _ in edges]
    cols = [j for _, _, j in edges]
    mat = sp.csr_matrix((np.ones(len(edges), dtype=np.int64), (rows, cols)), shape=(n, n))
    bm = BranchingMatrix(
        labels=[label_of(t) for t in types],
        matrix=mat,
        transitions={(i, d): j for i, d, j in edges},
        constraint=constraint,
        l=l,
    )
    if not apply_order:
        return bm
    order = order or NeighborOrder.default(constraint)
    if order.constraint is not constraint:
        raise ValueError("neighbour order belongs to a different lattice")
    keep = [k for k, t in enumerate(types) if not closes_from_above(t, constraint, l, order)]
    out = bm.restrict(keep)
    out.ordered = True
    out.order = order
    if reclose:
        out = out.restrict(out.reachable())
    return out


def reduce_matrix(
    bm: BranchingMatrix,
    partition: Sequence[Sequence["int | str"]],
    names: Optional[Sequence[str]] = None,
) -> BranchingMatrix:
    """Lump types into groups; requires constant row-block sums within each group."""
    groups = [[g if isinstance(g, int) else bm.index(g) for g in grp] for grp in partition]
    flat = sorted(k for grp in groups for k in grp)
    if flat != list(range(bm.ntypes)):
        raise ValueError("partition must cover every type exactly once")
    if 0 not in groups[0]:
        raise ValueError("the first group must contain the root type")
    dense = bm.dense()
    k = len(groups)
    block = np.zeros((bm.ntypes, k), dtype=np.int64)
    for h, grp in enumerate(groups):
        block[:, h] = dense[:, grp].sum(axis=1)
    out = np.zeros((k, k), dtype=np.int64)
    for g, grp in enumerate(groups):
        rows = block[grp]
        if not (rows == rows[0]).all():
            raise NotLumpable(f"group {g} has unequal transition counts into some group")
        out[g] = rows[0]
    labels = list(names) if names else ["{" + ",".join(bm.labels[i] for i in grp) + "}" for grp in groups]
    return BranchingMatrix(
        labels=labels,
        matrix=sp.csr_matrix(out),
        constraint=bm.constraint,
        l=bm.l,
        ordered=bm.ordered,
        order=bm.order,
    )


@dataclass(frozen=True)
class SpectralResult:
    lambda_star: float
    iterations: int
    residual: float


def spectral_radius(
    m: "BranchingMatrix | sp.spmatrix | np.ndarray",
    tol: float = 1e-9,
    max_iter: int = 1_000_000,
) -> SpectralResult:
    """Perron root by power iteration on ``M + I`` from the all-ones vector.

    The unit shift removes periodicity (bipartite lattices give period-2
    matrices) without moving the eigenvector.  The residual is
    ``||Mv - lambda v||_inf / ||v||_inf``.
    """
    if isinstance(m, BranchingMatrix):
        m = m.matrix
    a = sp.csr_matrix(m, dtype=np.float64)
    n = a.shape[0]
    if a.shape != (n, n):
        raise ValueError("matrix must be square")
    if n and a.data.size and a.data.min() < 0:
        raise ValueError("matrix must be nonnegative")
    v = np.ones(n)
    lam = 0.0
    residual = np.inf
    for it in range(1, max_iter + 1):
        av = a @ v
        w = av + v
        norm = np.abs(w).max()
        if norm == 0.0:
            return SpectralResult(0.0, it, 0.0)
        lam = np.abs(av).max() / np.abs(v).max()
        residual = np.abs(av - lam * v).max() / np.abs(v).max()
        if residual <= tol:
            return SpectralResult(float(lam), it, float(residual))
        v = w / norm
    raise NoConvergence(f"power iteration did not reach residual {tol} in {max_iter} steps (residual {residual:.3g})")


@dataclass(frozen=True)
class SupertreeCheck:
    ok: bool
    trials: int
    counterexample: Optional[list[str]] = None

    def __bool__(self) -> bool:
        return self.ok


def _pruned(q, where: dict, steps: Sequence[Direction], dirs, rank) -> bool:
    """Would stepping to ``q`` close a short cycle from above at some earlier vertex?"""
    last = len(steps)
    for e in dirs:
        w = (q[0] - e[0], q[1] - e[1])
        k = where.get(w)
        if k is None or k == last:
            continue
        # q closes a cycle at w; compare with the step that left w
        if rank[e] > rank[steps[k]]:
            return True
    return False


def survives_in_saw_tree(steps: Sequence[Direction], constraint: Constraint, order: NeighborOrder) -> bool:
    """Is this step sequence a root path of the order-pruned lattice SAW tree?"""
    dirs = set(constraint.directions)
    pos = (0, 0)
    where = {pos: 0}
    for k, d in enumerate(steps):
        if d not in dirs:
            return False
        q = (pos[0] + d[0], pos[1] + d[1])
        if q in where or _pruned(q, where, steps[:k], constraint.directions, order.rank):
            return False
        where[q] = k + 1
        pos = q
    return True


def random_saw_tree_walk(
    constraint: Constraint,
    order: NeighborOrder,
    length: int,
    rng: random.Random,
) -> Steps:
    """A random root path of the lattice SAW tree (order pruning applied).

    The walk stops early when it has no surviving continuation.
    """
    dirs = constraint.directions
    pos = (0, 0)
    where = {pos: 0}
    steps: list[Direction] = []
    for _ in range(length):
        options = []
        for d in dirs:
            q = (pos[0] + d[0], pos[1] + d[1])
            if q not in where and not _pruned(q, where, steps, dirs, order.rank):
                options.append(d)
        if not options:
            break
        d = rng.choice(options)
        pos = (pos[0] + d[0], pos[1] + d[1])
        where[pos] = len(steps) + 1
        steps.append(d)
    return tuple(steps)


def verify_supertree(
    bm: BranchingMatrix,
    constraint: "Constraint | str",
    order: Optional[NeighborOrder] = None,
    trials: int = 10_000,
    walk_len: int = 20,
    seed: int = 0,
) -> SupertreeCheck:
    """Check that random SAW-tree walks are all generated by ``bm``."""
    constraint = Constraint.parse(constraint)
    if bm.transitions is None:
        raise ValueError("lumped matrices carry no step labels")
    if walk_len > 20:
        raise ValueError("walk_len is capped at 20")
    order = order or NeighborOrder.default(constraint)
    rng = random.Random(seed)
    for _ in range(trials):
        steps = random_saw_tree_walk(constraint, order, walk_len, rng)
        state = 0
        for k, d in enumerate(steps):
            state = bm.transitions.get((state, d))
            if state is None:
                return SupertreeCheck(False, trials, [DIRECTION_NAME[e] for e in steps[: k + 1]])
    return SupertreeCheck(True, trials)


def write_bm_text(bm: BranchingMatrix) -> str:
    """Header ``cons l ordered ntypes``, ``id<TAB>label`` lines, then ``i j value`` triplets."""
    cons = bm.constraint.value if bm.constraint else "-"
    l = str(bm.l) if bm.l is not None else "-"
    lines = [f"{cons} {l} {int(bm.ordered)} {bm.ntypes}"]
    lines += [f"{k}\t{label}" for k, label in enumerate(bm.labels)]
    coo = bm.matrix.tocoo()
    for i, j, v in sorted(zip(coo.row.tolist(), coo.col.tolist(), coo.data.tolist())):
        if v:
            lines.append(f"{i} {j} {int(v)}")
    return "\n".join(lines) + "\n"


def read_bm_text(text: str) -> BranchingMatrix:
    lines = text.splitlines()
    cons, l, ordered, n = lines[0].split()
    n = int(n)
    labels = []
    for k in range(n):
        idx, label = lines[1 + k].split("\t")
        if int(idx) != k:
            raise ValueError(f"label line {k} has id {idx}")
        labels.append(label)
    rows, cols, vals = [], [], []
    for line in lines[1 + n :]:
        if not line.strip():
            continue
        i, j, v = line.split()
        rows.append(int(i))
        cols.append(int(j))
        vals.append(int(v))
    mat = sp.csr_matrix((np.array(vals, dtype=np.int64), (rows, cols)), shape=(n, n))
    constraint = None if cons == "-" else Constraint.parse(cons)
    transitions = None
    if labels and all(lab == ROOT_LABEL or set(lab.split(".")) <= COMPASS.keys() for lab in labels):
        # lattice-walk labels: the child's last step is the transition direction
        transitions = {}
        for i, j in zip(rows, cols):
            transitions[(i, steps_of(labels[j])[-1])] = j
    return BranchingMatrix(
        labels=labels,
        matrix=mat,
        transitions=transitions,
        constraint=constraint,
        l=None if l == "-" else int(l),
        ordered=bool(int(ordered)),
    )


@dataclass(frozen=True)
class OrderCandidate:
    order: NeighborOrder
    ntypes: int
    lambda_star: float


def search_orders(
    constraint: "Constraint | str",
    l: int,
    target_ntypes: Optional[int] = None,
    target_lambda: Optional[float] = None,
    orders: Optional[Sequence[NeighborOrder]] = None,
) -> list[OrderCandidate]:
    """Ordered-matrix results for each canonical order, best match first."""
    constraint = Constraint.parse(constraint)
    orders = list(orders) if orders is not None else canonical_orders(constraint)
    types, _ = _unordered(constraint, l)
    pairs = [_closure_pairs(t, constraint, l) for t in types]
    base = build_matrix(constraint, l)
    out = []
    for order in orders:
        rank = order.rank
        keep = [k for k, ps in enumerate(pairs) if not any(rank[a] > rank[b] for a, b in ps)]
        sub = base.restrict(keep)
        out.append(OrderCandidate(order, sub.ntypes, spectral_radius(sub).lambda_star))

    def score(c: OrderCandidate) -> tuple[float, float]:
        dn = abs(c.ntypes - target_ntypes) if target_ntypes is not None else 0
        dl = abs(c.lambda_star - target_lambda) if target_lambda is not None else 0.0
        # ties keep the candidate order, so the default order wins among equals
        return (dn, round(dl, 9))

    return sorted(out, key=score)
