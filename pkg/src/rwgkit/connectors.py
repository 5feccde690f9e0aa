"""The fifteen connector modules used to join molecular motifs.

Every kind takes ``size`` (scale of the core structure) and ``branch``
(number of extra branches).  Unless a kind says otherwise, ``branch`` adds
pendant carbons attached round-robin to the core nodes.  Node/edge counts are
closed-form, see ``connector_counts``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from functools import lru_cache
from importlib import resources

import numpy as np

from .graph import AttributedGraph, rng_from

CARBON = "C"


class ConnectorParamError(ValueError):
    pass


@lru_cache(maxsize=None)
def connector_registry() -> dict:
    text = resources.files("rwgkit.resources").joinpath("connectors.json").read_text("utf-8")
    return json.loads(text)


KINDS = ("star", "path", "fan", "cusped_polygon", "random_bipartite", "tree", "trident",
         "conical_connection", "chain_bypass", "partial_polygon", "complete_graph", "grid",
         "cycle", "dual_ring", "triangle")

MIN_SIZE = {
    "star": 1, "path": 1, "fan": 1, "cusped_polygon": 3, "random_bipartite": 1, "tree": 1,
    "trident": 1, "conical_connection": 2, "chain_bypass": 3, "partial_polygon": 3,
    "complete_graph": 1, "grid": 2, "cycle": 3, "dual_ring": 3, "triangle": 1,
}

# kinds whose ``branch`` is consumed by the core construction (no pendants)
_NO_PENDANTS = {"random_bipartite", "tree", "chain_bypass"}


@dataclass(frozen=True)
class ConnectorKind:
    kind: str
    size: int
    branch: int = 0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConnectorParamError(f"unknown connector kind {self.kind!r}")
        if self.size < MIN_SIZE[self.kind]:
            raise ConnectorParamError(
                f"{self.kind} needs size >= {MIN_SIZE[self.kind]}, got {self.size}")
        if self.branch < 0:
            raise ConnectorParamError("branch must be non-negative")

    @classmethod
    def by_index(cls, index: int, size: int, branch: int = 0) -> "ConnectorKind":
        """1-based position in the connector table."""
        return cls(KINDS[index - 1], size, branch)


def connector_counts(kind: str, size: int, branch: int = 0) -> tuple[int, int]:
    s, b = size, branch
    if kind == "star":
        n, e = s + 1, s
    elif kind == "path":
        n, e = s, s - 1
    elif kind == "fan":
        n, e = s + 1, 2 * s - 1
    elif kind == "cusped_polygon":
        n, e = 2 * s, 2 * s
    elif kind == "random_bipartite":
        return 2 * s, min(2 * s - 1 + b, s * s)
    elif kind == "tree":
        return s, s - 1
    elif kind == "trident":
        n, e = 3 * s, 3 * s - 1
    elif kind == "conical_connection":
        n, e = s + 2, 2 * s - 1
    elif kind == "chain_bypass":
        nb = min(b, s - 2)
        return s + nb, s - 1 + 2 * nb
    elif kind == "partial_polygon":
        n, e = s, s - 1
    elif kind == "complete_graph":
        n, e = s, s * (s - 1) // 2
    elif kind == "grid":
        n, e = s * s, 2 * s * (s - 1)
    elif kind == "cycle":
        n, e = s, s
    elif kind == "dual_ring":
        n, e = 2 * s, 2 * s + 1
    elif kind == "triangle":
        n, e = s + 2, 2 * s + 1
    else:
        raise ConnectorParamError(f"unknown connector kind {kind!r}")
    return n + b, e + b


def _ring(nodes):
    return [(nodes[i], nodes[(i + 1) % len(nodes)]) for i in range(len(nodes))]


def _core(kind: str, s: int, b: int, rng: np.random.Generator) -> tuple[int, list]:
    if kind == "star":
        return s + 1, [(0, i) for i in range(1, s + 1)]
    if kind == "path":
        return s, [(i, i + 1) for i in range(s - 1)]
    if kind == "fan":
        return s + 1, [(0, i) for i in range(1, s + 1)] + [(i, i + 1) for i in range(1, s)]
    if kind == "cusped_polygon":
        return 2 * s, _ring(list(range(s))) + [(i, s + i) for i in range(s)]
    if kind == "random_bipartite":
        left = list(range(s))
        right = list(range(s, 2 * s))
        edges = set()
        placed_l, placed_r = [left[0]], []
        for i in range(s):
            if i > 0:
                placed_l.append(left[i])
                edges.add((left[i], int(rng.choice(placed_r))))
            placed_r.append(right[i])
            edges.add((int(rng.choice(placed_l[: i + 1])), right[i]))
        extra = min(b, s * s - len(edges))
        missing = [(u, v) for u in left for v in right if (u, v) not in edges]
        if extra:
            pick = rng.choice(len(missing), size=extra, replace=False)
            edges.update(missing[int(k)] for k in pick)
        return 2 * s, sorted(edges)
    if kind == "tree":
        arity = b + 2
        return s, [((i - 1) // arity, i) for i in range(1, s)]
    if kind == "trident":
        edges = []
        for t in range(s):
            c = 3 * t
            edges += [(c, c + 1), (c, c + 2)]
            if t:
                edges.append((c - 3, c))
        return 3 * s, edges
    if kind == "conical_connection":
        top, bottom = s, s + 1
        half = (s + 1) // 2
        edges = [(i, i + 1) for i in range(s - 1)]
        edges += [(i, top) for i in range(half)] + [(i, bottom) for i in range(half, s)]
        return s + 2, edges
    if kind == "chain_bypass":
        nb = min(b, s - 2)
        edges = [(i, i + 1) for i in range(s - 1)]
        for k in range(nb):
            start = k % (s - 2)
            edges += [(start, s + k), (s + k, start + 2)]
        return s + nb, edges
    if kind == "partial_polygon":
        # polygon with its closing edge missing; extensions go on the open corners
        return s, [(i, i + 1) for i in range(s - 1)]
    if kind == "complete_graph":
        return s, [(i, j) for i in range(s) for j in range(i + 1, s)]
    if kind == "grid":
        edges = []
        for r in range(s):
            for c in range(s):
                v = r * s + c
                if c + 1 < s:
                    edges.append((v, v + 1))
                if r + 1 < s:
                    edges.append((v, v + s))
        return s * s, edges
    if kind == "cycle":
        return s, _ring(list(range(s)))
    if kind == "dual_ring":
        return 2 * s, _ring(list(range(s))) + _ring(list(range(s, 2 * s))) + [(0, s)]
    if kind == "triangle":
        # strip of s triangles: vertices 0..s+1, triangle t = (t, t+1, t+2)
        edges = [(i, i + 1) for i in range(s + 1)] + [(i, i + 2) for i in range(s)]
        return s + 2, edges
    raise ConnectorParamError(kind)


def _pendant_hosts(kind: str, core_n: int, s: int, b: int) -> list[int]:
    if kind == "partial_polygon":
        ends = [0, core_n - 1] if core_n > 1 else [0]
        return [ends[i % len(ends)] for i in range(b)]
    return [i % core_n for i in range(b)]


def build_connector(kind: ConnectorKind, seed: int = 0, feature_dim: int = 5,
                    tag: str = CARBON) -> AttributedGraph:
    """Construct a connector graph of carbon atoms."""
    rng = rng_from(seed)
    s, b = kind.size, kind.branch
    n, edges = _core(kind.kind, s, b, rng)
    if kind.kind not in _NO_PENDANTS:
        for i, host in enumerate(_pendant_hosts(kind.kind, n, s, b)):
            edges.append((host, n + i))
        n += b
    from .molecular import atom_features  # local import: molecular imports this module
    tags = [tag] * n
    return AttributedGraph(n, edges, False, atom_features(tags, feature_dim), tags)
