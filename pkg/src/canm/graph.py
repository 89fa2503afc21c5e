"""DAG machinery for treatment networks.

Nodes are integers 0..n-1 and stand for the treatment variables only; the
outcome is implicit (every treatment points into it) and never appears as a
node here. All graph values are immutable and every operation is a pure
function, so they are safe to share across concurrent tasks.
"""
from __future__ import annotations

import heapq
import json
from dataclasses import dataclass

import numpy as np

from .errors import UsageError


@dataclass(frozen=True)
class Dag:
    """Directed acyclic graph over ``n`` nodes with edge set {(i, j): i -> j}."""

    n: int
    edges: frozenset = frozenset()

    def __post_init__(self):
        object.__setattr__(self, "edges", frozenset((int(a), int(b)) for a, b in self.edges))
        if self.n < 0:
            raise UsageError("node count must be nonnegative")
        for a, b in self.edges:
            if a == b:
                raise UsageError(f"self-loop at node {a}")
            if not (0 <= a < self.n and 0 <= b < self.n):
                raise UsageError(f"edge ({a}, {b}) out of range for n={self.n}")
        # acyclicity check; raises on failure
        topological_order(self)

    def parents(self, i: int) -> frozenset:
        return frozenset(a for a, b in self.edges if b == i)

    def children(self, i: int) -> frozenset:
        return frozenset(b for a, b in self.edges if a == i)

    def parent_sets(self) -> tuple:
        pa = [set() for _ in range(self.n)]
        for a, b in self.edges:
            pa[b].add(a)
        return tuple(frozenset(s) for s in pa)

    def max_degree(self) -> int:
        deg = [0] * self.n
        for a, b in self.edges:
            deg[a] += 1
            deg[b] += 1
        return max(deg, default=0)

    def adjacency(self) -> np.ndarray:
        adj = np.zeros((self.n, self.n), dtype=bool)
        for a, b in self.edges:
            adj[a, b] = True
        return adj

    def to_json(self) -> dict:
        return {"n": self.n, "edges": sorted([a, b] for a, b in self.edges)}

    @classmethod
    def from_json(cls, obj: dict) -> "Dag":
        try:
            return cls(int(obj["n"]), frozenset((int(a), int(b)) for a, b in obj["edges"]))
        except (KeyError, TypeError) as exc:
            raise UsageError(f"malformed graph JSON: {exc}") from exc

    def save(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_json(), fh, indent=1, sort_keys=True)
            fh.write("\n")

    @classmethod
    def load(cls, path) -> "Dag":
        with open(path) as fh:
            return cls.from_json(json.load(fh))


@dataclass(frozen=True)
class Admg:
    """A DAG plus bidirected edges marking latent confounding between pairs."""

    dag: Dag
    bidirected: frozenset = frozenset()

    def __post_init__(self):
        pairs = set()
        for pair in self.bidirected:
            i, j = sorted(int(v) for v in pair)
            if i == j:
                raise UsageError(f"bidirected self-pair at node {i}")
            if not (0 <= i < self.dag.n and 0 <= j < self.dag.n):
                raise UsageError(f"bidirected pair ({i}, {j}) out of range")
            pairs.add((i, j))
        object.__setattr__(self, "bidirected", frozenset(pairs))


def topological_order(g: Dag) -> list:
    """Topological order with ties broken by ascending node index.

    Deterministic for a fixed graph. Raises UsageError if a cycle is found
    (unreachable for a validly constructed Dag).
    """
    indeg = [0] * g.n
    children = [[] for _ in range(g.n)]
    for a, b in g.edges:
        indeg[b] += 1
        children[a].append(b)
    heap = [v for v in range(g.n) if indeg[v] == 0]
    heapq.heapify(heap)
    order = []
    while heap:
        v = heapq.heappop(heap)
        order.append(v)
        for w in children[v]:
            indeg[w] -= 1
            if indeg[w] == 0:
                heapq.heappush(heap, w)
    if len(order) != g.n:
        raise UsageError("graph contains a cycle")
    return order


def _reach_from(children: list, src: int) -> set:
    seen = set()
    stack = list(children[src])
    while stack:
        v = stack.pop()
        if v not in seen:
            seen.add(v)
            stack.extend(children[v])
    return seen


def transitive_closure(g: Dag) -> Dag:
    """Edge (i, j) in the result iff a directed path i ~> j exists in g."""
    children = [[] for _ in range(g.n)]
    for a, b in g.edges:
        children[a].append(b)
    edges = set()
    for src in range(g.n):
        for dst in _reach_from(children, src):
            edges.add((src, dst))
    return Dag(g.n, frozenset(edges))


def transitive_reduction(g: Dag) -> Dag:
    """Unique minimum-edge DAG with the same transitive closure as g.

    A closure edge (u, v) survives iff no intermediate w has u ~> w ~> v;
    such edges are necessarily direct edges of g, so the result is a subset
    of g's edge set.
    """
    clos = transitive_closure(g).edges
    kept = set()
    for u, v in clos:
        if not any((u, w) in clos and (w, v) in clos for w in range(g.n)):
            kept.add((u, v))
    return Dag(g.n, frozenset(kept))


def shd(g1: Dag, g2: Dag) -> int:
    """Structural Hamming distance: count of differing directed edge slots.

    A reversed edge differs in both slots and therefore costs 2.
    """
    if g1.n != g2.n:
        raise UsageError(f"node count mismatch: {g1.n} vs {g2.n}")
    return len(g1.edges ^ g2.edges)


def random_dag(n: int, d_max: int, edge_prob: float | None = None, seed: int = 0) -> Dag:
    """Random DAG with every node's total degree (in + out) capped at d_max.

    Candidate edges are laid against a random topological order, visited in a
    random order, accepted with probability ``edge_prob`` and rejected when
    either endpoint's degree budget would be exceeded. Deterministic per seed.
    """
    if n < 1:
        raise UsageError("n must be >= 1")
    if d_max < 1:
        raise UsageError("d_max must be >= 1")
    if edge_prob is None:
        edge_prob = min(1.0, d_max / (n - 1)) if n > 1 else 0.0
    if not 0.0 <= edge_prob <= 1.0:
        raise UsageError("edge_prob must lie in [0, 1]")
    rng = np.random.default_rng(seed)
    order = rng.permutation(n)
    cand = [(int(order[i]), int(order[j])) for i in range(n) for j in range(i + 1, n)]
    perm = rng.permutation(len(cand))
    deg = [0] * n
    edges = set()
    for k in perm:
        u, v = cand[k]
        if rng.random() < edge_prob and deg[u] < d_max and deg[v] < d_max:
            edges.add((u, v))
            deg[u] += 1
            deg[v] += 1
    return Dag(n, frozenset(edges))


def _latent_expansion(g: Admg):
    """Children/parents maps of the DAG with one fork node per bidirected pair."""
    n = g.dag.n
    total = n + len(g.bidirected)
    children = [[] for _ in range(total)]
    parents = [[] for _ in range(total)]
    for a, b in g.dag.edges:
        children[a].append(b)
        parents[b].append(a)
    for k, (i, j) in enumerate(sorted(g.bidirected)):
        lat = n + k
        for dst in (i, j):
            children[lat].append(dst)
            parents[dst].append(lat)
    return children, parents


def d_separated(g: Admg, a: int, b: int, cond) -> bool:
    """m-separation of a and b given cond, with bidirected edges read as
    latent common-cause forks. Standard active-trail reachability."""
    cond = frozenset(int(v) for v in cond)
    if a == b:
        raise UsageError("a and b must differ")
    if a in cond or b in cond:
        raise UsageError("a and b must not be conditioned on")
    children, parents = _latent_expansion(g)
    total = len(children)

    anc = set(cond)
    stack = list(cond)
    while stack:
        v = stack.pop()
        for p in parents[v]:
            if p not in anc:
                anc.add(p)
                stack.append(p)

    # states: (node, direction); direction True = arrived via an edge out of
    # the node (moving up), False = arrived via an edge into it (moving down)
    visited = set()
    stack = [(a, True)]
    while stack:
        v, up = stack.pop()
        if (v, up) in visited:
            continue
        visited.add((v, up))
        if v == b:
            return False
        if up and v not in cond:
            for p in parents[v]:
                stack.append((p, True))
            for c in children[v]:
                stack.append((c, False))
        elif not up:
            if v not in cond:
                for c in children[v]:
                    stack.append((c, False))
            if v in anc:
                for p in parents[v]:
                    stack.append((p, True))
    return True
