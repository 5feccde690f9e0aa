"""Brute-force reference implementations shared by the unit and acceptance tests.

Each oracle is written against a different formulation than the library code
so that agreement is evidence, not tautology.
"""

from __future__ import annotations

import itertools
import math

import numpy as np


# (name, node count, edge count) transcribed independently from the motif table
MOTIF_TABLE = [
    ("Acetic Acid", 3, 2), ("Adrenaline", 5, 6), ("Ammonia", 2, 3), ("Anthracene", 24, 12),
    ("Benzene Ring", 6, 6), ("Benzoic Acid", 9, 8), ("Ethane", 2, 1), ("Ethanol", 3, 2),
    ("Fullerenes", 60, 90), ("Glucose", 24, 12), ("Hexamethylbenzene", 21, 15),
    ("Hydrated Sulfuric Acid", 4, 5), ("Imidazole", 9, 6), ("Indole", 15, 9), ("Methane", 1, 1),
    ("Methyl Anthranilate", 18, 12), ("Nitrobenzene", 9, 9), ("Nitrophenol", 10, 10),
    ("Porphyrin", 24, 23), ("Pyridine", 6, 5), ("Pyrimidine", 8, 5), ("Pyrrole", 6, 5),
    ("Simplified Dopamine", 11, 11), ("Thiazole", 7, 5), ("Thioether", 12, 7), ("Vitamin C", 20, 10),
]


# ---------------------------------------------------------------------------
# maximal cliques: enumerate every vertex subset
# ---------------------------------------------------------------------------

def maximal_clique_count_bruteforce(n: int, edges) -> int:
    adj = [0] * n
    for a, b in edges:
        adj[a] |= 1 << b
        adj[b] |= 1 << a
    cliques = []
    for mask in range(1, 1 << n):
        members = [v for v in range(n) if mask >> v & 1]
        if all((adj[v] | (1 << v)) & mask == mask for v in members):
            cliques.append(mask)
    clique_set = set(cliques)
    count = 0
    for c in cliques:
        # maximal: no single-vertex extension is a clique
        if not any((c | (1 << v)) in clique_set for v in range(n) if not c >> v & 1):
            count += 1
    return count


def all_edge_sets(n: int):
    pairs = list(itertools.combinations(range(n), 2))
    for bits in range(1 << len(pairs)):
        yield [pairs[i] for i in range(len(pairs)) if bits >> i & 1]


# ---------------------------------------------------------------------------
# merge validity: contract blocks and look for 2-cycles
# ---------------------------------------------------------------------------

def set_partitions(items):
    items = list(items)
    if not items:
        yield []
        return
    first, rest = items[0], items[1:]
    for part in set_partitions(rest):
        yield [[first]] + part
        for i in range(len(part)):
            yield part[:i] + [[first] + part[i]] + part[i + 1:]


def bell(n: int) -> int:
    row = [1]
    for _ in range(n):
        nxt = [row[-1]]
        for x in row:
            nxt.append(nxt[-1] + x)
        row = nxt
    return row[0]


def merge_violations_oracle(x_vertices, edges, y_parents, blocks) -> set:
    """Violations as a set of (condition, block frozenset, vertex or None).

    Condition 1: contract a block that acts as a parent of Y; an outside vertex
    on a 2-cycle with the contracted node makes the merged graph cyclic.
    Condition 2: the block's Pa(Y) share is neither empty nor everything.
    """
    out = set()
    for b in blocks:
        fb = frozenset(b)
        inside_pa = fb & set(y_parents)
        if inside_pa:
            into_block, from_block = set(), set()
            for a, c in edges:
                if a in fb and c not in fb:
                    from_block.add(c)
                if c in fb and a not in fb:
                    into_block.add(a)
            for v in from_block & into_block:
                out.add((1, fb, v))
        if inside_pa and inside_pa != fb:
            out.add((2, fb, None))
    return out


def library_violations(scm, blocks) -> set:
    from rwgkit.causal import PartitionSpec, check_merge_validity
    part = PartitionSpec(tuple((f"b{i}", frozenset(b)) for i, b in enumerate(blocks)))
    names = dict(part.blocks)
    return {(v.condition, names[v.block], v.vertex) for v in check_merge_validity(scm, part)}


def merge_disagreements(n: int, dags) -> tuple[int, int]:
    """(cases checked, disagreements) over dags x every Pa(Y) subset x every partition."""
    from rwgkit.causal import MicroSCM
    verts = list(range(n))
    partitions = list(set_partitions(verts))
    checked = bad = 0
    for edges in dags:
        for bits in range(1 << n):
            pa = [v for v in verts if bits >> v & 1]
            scm = MicroSCM.from_dag(verts, edges, pa)
            for blocks in partitions:
                checked += 1
                if library_violations(scm, blocks) != merge_violations_oracle(verts, edges, pa, blocks):
                    bad += 1
    return checked, bad


def upper_triangular_dags(n: int):
    """Every DAG whose topological order is 0..n-1; all DAGs up to relabelling."""
    pairs = list(itertools.combinations(range(n), 2))
    for bits in range(1 << len(pairs)):
        yield [pairs[i] for i in range(len(pairs)) if bits >> i & 1]


def all_labeled_dags(n: int):
    und = list(itertools.combinations(range(n), 2))
    for choice in itertools.product((0, 1, 2), repeat=len(und)):
        edges = []
        for (a, b), c in zip(und, choice):
            if c == 1:
                edges.append((a, b))
            elif c == 2:
                edges.append((b, a))
        if _acyclic(n, edges):
            yield edges


def _acyclic(n, edges) -> bool:
    indeg = [0] * n
    out = [[] for _ in range(n)]
    for a, b in edges:
        indeg[b] += 1
        out[a].append(b)
    stack = [v for v in range(n) if indeg[v] == 0]
    seen = 0
    while stack:
        v = stack.pop()
        seen += 1
        for w in out[v]:
            indeg[w] -= 1
            if indeg[w] == 0:
                stack.append(w)
    return seen == n


# ---------------------------------------------------------------------------
# engine: a numpy reference forward pass
# ---------------------------------------------------------------------------

def relative_error(a: np.ndarray, b: np.ndarray) -> float:
    denom = max(np.max(np.abs(a)), np.max(np.abs(b)), 1e-12)
    return float(np.max(np.abs(a - b)) / denom)


def gamma_closed_form(t: int, init=1.0, floor=0.2, eps=0.01) -> float:
    return max(init * math.exp(t * math.log1p(-eps)), floor)
