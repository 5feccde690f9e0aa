"""Exact intervention lower bounds over partially directed causal graphs."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction


class BoundError(ValueError):
    pass


@dataclass(frozen=True)
class PartiallyDirectedGraph:
    vertices: tuple
    directed_edges: tuple = ()
    undirected_edges: tuple = ()

    def __post_init__(self):
        verts = tuple(self.vertices)
        vs = set(verts)
        if len(vs) != len(verts):
            raise BoundError("duplicate vertex ids")
        d = tuple(tuple(e) for e in self.directed_edges)
        u = tuple(tuple(sorted(e, key=str)) for e in self.undirected_edges)
        for a, b in d + u:
            if a not in vs or b not in vs:
                raise BoundError(f"edge ({a}, {b}) uses an unknown vertex")
            if a == b:
                raise BoundError(f"self-loop on {a}")
        dpairs = {frozenset(e) for e in d}
        upairs = {frozenset(e) for e in u}
        if dpairs & upairs:
            raise BoundError("a pair appears both directed and undirected")
        if len(upairs) != len(u):
            raise BoundError("duplicate undirected edge")
        object.__setattr__(self, "vertices", verts)
        object.__setattr__(self, "directed_edges", d)
        object.__setattr__(self, "undirected_edges", u)
        if _has_cycle(verts, d):
            raise BoundError("directed part contains a cycle")


def _has_cycle(vertices, edges) -> bool:
    out = {v: [] for v in vertices}
    for a, b in edges:
        out[a].append(b)
    state = {v: 0 for v in vertices}
    for root in vertices:
        if state[root]:
            continue
        stack = [(root, iter(out[root]))]
        state[root] = 1
        while stack:
            v, it = stack[-1]
            nxt = next(it, None)
            if nxt is None:
                state[v] = 2
                stack.pop()
            elif state[nxt] == 1:
                return True
            elif state[nxt] == 0:
                state[nxt] = 1
                stack.append((nxt, iter(out[nxt])))
    return False


@dataclass(frozen=True)
class UndirectedGraph:
    vertices: tuple
    edges: tuple = ()

    def adjacency(self) -> dict:
        adj = {v: set() for v in self.vertices}
        for a, b in self.edges:
            adj[a].add(b)
            adj[b].add(a)
        return adj


def chain_components(g: PartiallyDirectedGraph) -> list[UndirectedGraph]:
    """Connected components of the undirected part; isolated vertices are singletons."""
    adj = {v: set() for v in g.vertices}
    for a, b in g.undirected_edges:
        adj[a].add(b)
        adj[b].add(a)
    seen = set()
    comps = []
    for v in g.vertices:
        if v in seen:
            continue
        comp = [v]
        seen.add(v)
        i = 0
        while i < len(comp):
            for w in adj[comp[i]]:
                if w not in seen:
                    seen.add(w)
                    comp.append(w)
            i += 1
        members = set(comp)
        order = [x for x in g.vertices if x in members]
        edges = tuple(e for e in g.undirected_edges if e[0] in members)
        comps.append(UndirectedGraph(tuple(order), edges))
    return comps


def maximal_cliques(g: UndirectedGraph) -> list[frozenset]:
    """Bron-Kerbosch with Tomita pivoting (pivot maximises |P & N(u)|)."""
    adj = g.adjacency()
    out: list[frozenset] = []

    def expand(r: set, p: set, x: set) -> None:
        if not p and not x:
            out.append(frozenset(r))
            return
        pivot = max(p | x, key=lambda u: len(p & adj[u]))
        for v in list(p - adj[pivot]):
            expand(r | {v}, p & adj[v], x & adj[v])
            p.discard(v)
            x.add(v)

    if g.vertices:
        expand(set(), set(g.vertices), set())
    return out


def maximal_clique_count(g: UndirectedGraph) -> int:
    return len(maximal_cliques(g))


@dataclass(frozen=True)
class BoundInput:
    union_size: int
    lam: Fraction | float = 1
    label_count: int = 0
    sigma: Fraction | float | None = None
    independent_size: int | None = None

    def __post_init__(self):
        if self.union_size < 0 or self.label_count < 0:
            raise BoundError("sizes must be non-negative")
        if self.lam == 0:
            raise BoundError("lambda must be non-zero")
        if self.lam < 1:
            raise BoundError(f"lambda must be >= 1, got {self.lam}")
        if (self.sigma is None) != (self.independent_size is None):
            raise BoundError("sigma and independent_size come together")
        if self.sigma is not None and self.sigma <= 0:
            raise BoundError("sigma must be positive")


def _frac(x) -> Fraction:
    return x if isinstance(x, Fraction) else Fraction(x)


def atomic_bound(inp: BoundInput, r: int) -> int:
    """max(0, ceil((union/lambda + |Y| - r [- independent/sigma]) / 2)), exact rational arithmetic."""
    if r < 0:
        raise BoundError("r must be >= 0")
    num = Fraction(inp.union_size) / _frac(inp.lam) + inp.label_count - r
    if inp.sigma is not None:
        num -= Fraction(inp.independent_size) / _frac(inp.sigma)
    return max(0, math.ceil(num / 2))


def clique_number_r(g: PartiallyDirectedGraph) -> int:
    return sum(maximal_clique_count(c) for c in chain_components(g))


def atomic_bound_from_graph(g: PartiallyDirectedGraph, label_count: int = 0) -> int:
    """Atomic bound with union/lambda = |V| - label_count and r summed over chain components."""
    r = clique_number_r(g)
    n = len(g.vertices)
    if label_count > n:
        raise BoundError("more labels than vertices")
    return atomic_bound(BoundInput(n - label_count, 1, label_count), r)


def nonatomic_objective(n: int, k: int) -> float:
    return (n / k) * math.log2(math.log2(k))


def nonatomic_bound(n: int) -> tuple[float, int]:
    """min over integer k in [4, n] of (n/k) log2(log2 k); smallest k wins ties."""
    if n < 4:
        raise BoundError(f"non-atomic bound needs n >= 4 (log2 log2 k >= 0), got {n}")
    best_k, best = 4, nonatomic_objective(n, 4)
    for k in range(5, n + 1):
        f = nonatomic_objective(n, k)
        if f < best:
            best, best_k = f, k
    return best, best_k


def parse_edge_list(text: str) -> tuple[PartiallyDirectedGraph, list[str]]:
    """Parse ``a -> b`` / ``a -- b`` lines; a bare token declares an isolated vertex.

    Vertices named in ``labels: y1 y2`` lines are returned separately as label ids.
    """
    verts: list[str] = []
    d, u, labels = [], [], []

    def add(v):
        if v not in verts:
            verts.append(v)

    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("labels:"):
            for v in line[len("labels:"):].split():
                add(v)
                labels.append(v)
        elif "->" in line:
            a, b = (t.strip() for t in line.split("->", 1))
            add(a), add(b)
            d.append((a, b))
        elif "--" in line:
            a, b = (t.strip() for t in line.split("--", 1))
            add(a), add(b)
            u.append((a, b))
        elif len(line.split()) == 1:
            add(line)
        else:
            raise BoundError(f"line {lineno}: expected 'a -> b', 'a -- b' or a vertex id")
    return PartiallyDirectedGraph(tuple(verts), tuple(d), tuple(u)), labels
