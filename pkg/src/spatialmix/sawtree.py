"""Self-avoiding-walk trees and the tree ratio recursion.

The tree of self-avoiding walks from a root preserves the root marginal of
the uniform independent-set measure once cycle-closing copies are fixed
according to a neighbour order.  A closing step ``v_l -> w`` is compared at
``w`` against the step ``w -> v_k`` the walk took when it left ``w``: the copy
of ``w`` is fixed occupied if ``v_l >_w v_k`` and unoccupied otherwise.

Graphs are adjacency mappings ``{vertex: iterable of neighbours}``; vertices
must be hashable and mutually comparable when no order is supplied.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Hashable, Iterable, Mapping, Optional

from .exactcount import InfeasibleFixing

Vertex = Hashable
Graph = Mapping[Vertex, Iterable[Vertex]]
# rank(w, u): position of neighbour u in the order at w; larger means greater
RankFn = Callable[[Vertex, Vertex], int]

DEFAULT_NODE_BUDGET = 2_000_000


class TreeTooLarge(RuntimeError):
    pass


class UncutPath(ValueError):
    """A truncated branch was left without a boundary value."""


def _normalise(graph: Graph) -> dict[Vertex, list[Vertex]]:
    adj: dict[Vertex, list[Vertex]] = {v: [] for v in graph}
    for v, nbrs in graph.items():
        for u in nbrs:
            adj.setdefault(u, [])
            if u not in adj[v]:
                adj[v].append(u)
            if v not in adj[u]:
                adj[u].append(v)
    return adj


def sorted_rank(graph: Graph) -> RankFn:
    """Order each vertex's neighbours by their natural sort order."""
    adj = _normalise(graph)
    table = {w: {u: k for k, u in enumerate(sorted(nbrs))} for w, nbrs in adj.items()}
    return lambda w, u: table[w][u]


def lattice_rank(order) -> RankFn:
    """Rank function for lattice points under a homogeneous ``NeighborOrder``."""
    rank = order.rank
    return lambda w, u: rank[(u[0] - w[0], u[1] - w[1])]


@dataclass
class SawNode:
    origin: Vertex
    depth: int
    parent: Optional[int]
    children: list[int] = field(default_factory=list)
    fix: Optional[int] = None  # cycle-closing copies only
    truncated: bool = False  # expansion stopped at the depth cap


@dataclass
class SawTree:
    nodes: list[SawNode]
    closing: str = "fix"

    @property
    def root(self) -> SawNode:
        return self.nodes[0]

    def __len__(self) -> int:
        return len(self.nodes)

    def walk(self, idx: int) -> list[Vertex]:
        out = []
        node: Optional[int] = idx
        while node is not None:
            out.append(self.nodes[node].origin)
            node = self.nodes[node].parent
        return out[::-1]

    def leaves(self) -> list[int]:
        return [k for k, n in enumerate(self.nodes) if not n.children]


def build_saw_tree(
    graph: Graph,
    root: Vertex,
    rank: Optional[RankFn] = None,
    depth_cap: Optional[int] = None,
    closing: str = "fix",
    node_budget: int = DEFAULT_NODE_BUDGET,
) -> SawTree:
    """Materialise the SAW tree of ``graph`` from ``root``.

    ``closing="fix"`` keeps cycle-closing copies as fixed leaves.
    ``closing="prune"`` drops copies fixed unoccupied and deletes the node whose
    closing copy would be fixed occupied, together with its subtree; this gives
    the same root marginal when no boundary is imposed.
    """
    if depth_cap is not None and depth_cap < 0:
        raise ValueError("depth_cap must be non-negative")
    if closing not in ("fix", "prune"):
        raise ValueError(f"unknown closing mode {closing!r}")
    adj = _normalise(graph)
    if root not in adj:
        raise KeyError(root)
    rank = rank or sorted_rank(adj)

    nodes = [SawNode(origin=root, depth=0, parent=None)]
    # stack entries: (node index, walk as list, position map vertex -> index in walk)
    stack = [(0, [root], {root: 0})]
    while stack:
        idx, walk, pos = stack.pop()
        node = nodes[idx]
        if depth_cap is not None and node.depth >= depth_cap:
            node.truncated = bool(_open_steps(adj, walk, pos))
            continue
        cur = walk[-1]
        prev = walk[-2] if len(walk) > 1 else None
        for u in adj[cur]:
            if u == prev:
                continue
            if u in pos:
                k = pos[u]
                succ = walk[k + 1]
                fix = 1 if rank(u, cur) > rank(u, succ) else 0
                if closing == "fix":
                    nodes.append(SawNode(origin=u, depth=node.depth + 1, parent=idx, fix=fix))
                    node.children.append(len(nodes) - 1)
                continue
            if closing == "prune" and _closes_above(adj, rank, walk, pos, u):
                continue
            nodes.append(SawNode(origin=u, depth=node.depth + 1, parent=idx))
            child = len(nodes) - 1
            node.children.append(child)
            pos2 = dict(pos)
            pos2[u] = len(walk)
            stack.append((child, walk + [u], pos2))
        if len(nodes) > node_budget:
            raise TreeTooLarge(f"SAW tree exceeds {node_budget} nodes")
    return SawTree(nodes, closing)


def _open_steps(adj, walk, pos) -> list:
    cur = walk[-1]
    prev = walk[-2] if len(walk) > 1 else None
    return [u for u in adj[cur] if u != prev]


def _closes_above(adj, rank, walk, pos, u) -> bool:
    """Would appending ``u`` create a node whose closing copy is fixed occupied?"""
    for w in adj[u]:
        k = pos.get(w)
        if k is None or k == len(walk) - 1:
            continue
        if rank(w, u) > rank(w, walk[k + 1]):
            return True
    return False


def ratio_step(child_ratios: Iterable[float]) -> float:
    """One application of ``R = prod 1/(1 + R_child)``; ``inf`` children give 0."""
    r = 1.0
    for x in child_ratios:
        if x == math.inf:
            return 0.0
        r /= 1.0 + x
    return r


def evaluate_ratios(
    tree: SawTree,
    boundary: Optional[Mapping[int, int]] = None,
    fixing: Optional[Mapping[Vertex, int]] = None,
) -> float:
    """Ratio ``R = (1 - p)/p`` at the root.

    ``boundary`` fixes tree nodes by index; ``fixing`` fixes every copy of a
    graph vertex.  A truncated node that is not fixed raises :class:`UncutPath`.
    """
    boundary = dict(boundary or {})
    fixing = dict(fixing or {})
    n = len(tree.nodes)
    ratio = [0.0] * n
    # children always have larger indices than their parent
    for idx in range(n - 1, -1, -1):
        node = tree.nodes[idx]
        state = boundary.get(idx)
        if state is None:
            state = fixing.get(node.origin)
        if state is None and node.fix is not None:
            state = node.fix
        if state is not None:
            ratio[idx] = math.inf if state == 1 else 0.0
            continue
        if node.truncated:
            raise UncutPath(f"node {idx} at depth {node.depth} was truncated without a boundary value")
        ratio[idx] = ratio_step(ratio[c] for c in node.children)
    return ratio[0]


def probability_from_ratio(r: float) -> float:
    return 0.0 if r == math.inf else 1.0 / (1.0 + r)


def saw_marginal(
    graph: Graph,
    root: Vertex,
    fixing: Optional[Mapping[Vertex, int]] = None,
    rank: Optional[RankFn] = None,
) -> float:
    """Root marginal ``Pr[root unoccupied]`` from the full SAW tree, without materialising it."""
    adj = _normalise(graph)
    rank = rank or sorted_rank(adj)
    fixing = dict(fixing or {})
    if root in fixing:
        return 1.0 if fixing[root] == 0 else 0.0

    def rec(walk: list, pos: dict) -> float:
        cur = walk[-1]
        prev = walk[-2] if len(walk) > 1 else None
        r = 1.0
        for u in adj[cur]:
            if u == prev:
                continue
            if u in pos:
                succ = walk[pos[u] + 1]
                if rank(u, cur) > rank(u, succ):
                    return 0.0  # occupied copy forces cur unoccupied
                continue
            state = fixing.get(u)
            if state == 1:
                return 0.0
            if state == 0:
                continue
            pos[u] = len(walk)
            walk.append(u)
            child = rec(walk, pos)
            walk.pop()
            del pos[u]
            r /= 1.0 + child
        return r

    return probability_from_ratio(rec([root], {root: 0}))


def graph_marginal(graph: Graph, root: Vertex, fixing: Optional[Mapping[Vertex, int]] = None) -> float:
    """Exact ``Pr[root unoccupied | fixing]`` on a general graph by enumeration."""
    adj = _normalise(graph)
    fixing = dict(fixing or {})
    verts = sorted(adj, key=repr)
    for v, s in fixing.items():
        if s == 1 and any(fixing.get(u) == 1 for u in adj[v]):
            raise InfeasibleFixing(f"fixed occupied vertex {v!r} has an occupied neighbour")
    free = [v for v in verts if v not in fixing]
    state: dict[Vertex, int] = dict(fixing)

    totals = [0, 0]  # [root unoccupied, root occupied]

    def rec(k: int) -> None:
        if k == len(free):
            totals[state[root]] += 1
            return
        v = free[k]
        state[v] = 0
        rec(k + 1)
        if all(state.get(u) != 1 for u in adj[v]):
            state[v] = 1
            rec(k + 1)
        del state[v]

    rec(0)
    z = totals[0] + totals[1]
    if z == 0:
        raise InfeasibleFixing("no independent set is consistent with the fixing")
    return totals[0] / z


@dataclass(frozen=True)
class SawCheck:
    p_graph: float
    p_tree: float

    @property
    def diff(self) -> float:
        return abs(self.p_graph - self.p_tree)


def check_theorem_saw(
    graph: Graph,
    root: Vertex,
    fixing: Optional[Mapping[Vertex, int]] = None,
    rank: Optional[RankFn] = None,
) -> SawCheck:
    """Compare the graph marginal with the marginal computed on the SAW tree."""
    return SawCheck(graph_marginal(graph, root, fixing), saw_marginal(graph, root, fixing, rank))
