"""Core graph, sample and dataset types plus deterministic seeding."""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field, replace
from typing import Any, Iterable, Sequence

import numpy as np

GENERATOR_VERSION = "rwgkit-1.0"
SPLITS = ("train", "val", "test")
MASK64 = (1 << 64) - 1


class GraphError(ValueError):
    """Structural problem with a graph (bad endpoints, duplicate edges, ...)."""


class DimensionError(GraphError):
    pass


# ---------------------------------------------------------------------------
# Seeding
# ---------------------------------------------------------------------------

def splitmix64(x: int) -> int:
    """SplitMix64 finalizer (Steele, Lea, Flood 2014)."""
    x = (x + 0x9E3779B97F4A7C15) & MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & MASK64
    return x ^ (x >> 31)


def fnv1a64(text: str) -> int:
    h = 0xCBF29CE484222325
    for byte in text.encode("utf-8"):
        h ^= byte
        h = (h * 0x100000001B3) & MASK64
    return h


@dataclass(frozen=True)
class SeedStream:
    """Order-independent child seeds derived from one master seed.

    ``child = splitmix64(splitmix64(master ^ fnv1a64(tag)) ^ splitmix64(index))``
    with all arithmetic modulo 2**64.  Every (master, index, tag) triple maps to
    its own seed, so samples can be generated in any order or in parallel.
    """

    master_seed: int

    def derive(self, index: int, tag: str) -> int:
        return derive_seed(self, index, tag)

    def rng(self, index: int, tag: str) -> np.random.Generator:
        return np.random.default_rng(self.derive(index, tag))


def derive_seed(stream: SeedStream, index: int, tag: str) -> int:
    base = splitmix64((stream.master_seed & MASK64) ^ fnv1a64(tag))
    return splitmix64(base ^ splitmix64(index & MASK64))


def rng_from(seed: int) -> np.random.Generator:
    return np.random.default_rng(seed & MASK64)


# ---------------------------------------------------------------------------
# Graphs
# ---------------------------------------------------------------------------

def _canonical_edges(edges: Iterable[Sequence[int]], directed: bool) -> tuple[tuple[int, int], ...]:
    out = []
    for u, v in edges:
        u, v = int(u), int(v)
        if not directed and u > v:
            u, v = v, u
        out.append((u, v))
    return tuple(out)


@dataclass(frozen=True, eq=False)
class AttributedGraph:
    """Small attributed graph stored as a flat edge list.

    Undirected edges are canonicalised to ``u <= v`` on construction.  The
    feature matrix is made read-only so instances can be shared freely.
    """

    num_nodes: int
    edges: tuple[tuple[int, int], ...]
    directed: bool
    node_features: np.ndarray
    node_tags: tuple[str, ...] | None = None

    def __init__(self, num_nodes, edges, directed=False, node_features=None,
                 node_tags=None, feature_dim: int | None = None):
        num_nodes = int(num_nodes)
        if node_features is None:
            node_features = np.zeros((num_nodes, feature_dim or 0))
        feats = np.array(node_features, dtype=np.float64, copy=True)
        if feats.ndim == 1 and num_nodes == 0:
            feats = feats.reshape(0, feature_dim or 0)
        feats.setflags(write=False)
        object.__setattr__(self, "num_nodes", num_nodes)
        object.__setattr__(self, "edges", _canonical_edges(edges, directed))
        object.__setattr__(self, "directed", bool(directed))
        object.__setattr__(self, "node_features", feats)
        object.__setattr__(self, "node_tags", None if node_tags is None else tuple(node_tags))

    @property
    def feature_dim(self) -> int:
        return int(self.node_features.shape[1]) if self.node_features.ndim == 2 else 0

    @property
    def num_edges(self) -> int:
        return len(self.edges)

    def __eq__(self, other) -> bool:
        if not isinstance(other, AttributedGraph):
            return NotImplemented
        return (self.num_nodes == other.num_nodes
                and self.edges == other.edges
                and self.directed == other.directed
                and self.node_tags == other.node_tags
                and self.node_features.shape == other.node_features.shape
                and np.array_equal(self.node_features, other.node_features))

    def __hash__(self):
        return hash((self.num_nodes, self.edges, self.directed))

    def neighbors(self) -> list[set[int]]:
        """Undirected neighbourhoods (edge direction ignored)."""
        nbrs: list[set[int]] = [set() for _ in range(self.num_nodes)]
        for u, v in self.edges:
            nbrs[u].add(v)
            nbrs[v].add(u)
        return nbrs

    def is_connected(self) -> bool:
        if self.num_nodes <= 1:
            return True
        nbrs = self.neighbors()
        seen = {0}
        stack = [0]
        while stack:
            for w in nbrs[stack.pop()]:
                if w not in seen:
                    seen.add(w)
                    stack.append(w)
        return len(seen) == self.num_nodes

    def with_features(self, features: np.ndarray) -> "AttributedGraph":
        return AttributedGraph(self.num_nodes, self.edges, self.directed, features, self.node_tags)

    def with_edges(self, edges) -> "AttributedGraph":
        return AttributedGraph(self.num_nodes, edges, self.directed, self.node_features, self.node_tags)

    def remove_nodes(self, nodes: Iterable[int]) -> tuple["AttributedGraph", dict[int, int]]:
        """Drop ``nodes`` and their incident edges; returns the graph and the old->new index map."""
        drop = set(int(n) for n in nodes)
        keep = [i for i in range(self.num_nodes) if i not in drop]
        remap = {old: new for new, old in enumerate(keep)}
        edges = [(remap[u], remap[v]) for u, v in self.edges if u in remap and v in remap]
        tags = None if self.node_tags is None else [self.node_tags[i] for i in keep]
        feats = self.node_features[keep] if keep else np.zeros((0, self.feature_dim))
        return AttributedGraph(len(keep), edges, self.directed, feats, tags), remap


def validate_graph(g: AttributedGraph, allow_self_loops: bool = False) -> None:
    """Raise ``GraphError`` if any structural invariant is broken."""
    if g.num_nodes < 0:
        raise GraphError("negative node count")
    if g.node_features.ndim != 2 or g.node_features.shape[0] != g.num_nodes:
        raise DimensionError(
            f"node_features has shape {g.node_features.shape}, expected ({g.num_nodes}, d)")
    if not np.all(np.isfinite(g.node_features)):
        raise GraphError("non-finite node feature")
    if g.node_tags is not None and len(g.node_tags) != g.num_nodes:
        raise GraphError("node_tags length differs from num_nodes")
    seen = set()
    for u, v in g.edges:
        if not (0 <= u < g.num_nodes and 0 <= v < g.num_nodes):
            raise GraphError(f"edge ({u}, {v}) out of range for {g.num_nodes} nodes")
        if u == v and not allow_self_loops:
            raise GraphError(f"self-loop on node {u}")
        if not g.directed and u > v:
            raise GraphError(f"undirected edge ({u}, {v}) not canonical")
        if (u, v) in seen:
            raise GraphError(f"duplicate edge ({u}, {v})")
        seen.add((u, v))


@dataclass(frozen=True)
class AnchorPolicy:
    """Which node of host and part receives the bridging edge.

    ``None`` means uniform random choice from the attachment seed.
    """

    host_anchor: int | None = None
    part_anchor: int | None = None


RANDOM_ANCHOR = AnchorPolicy()


def attach_subgraph(host: AttributedGraph, part: AttributedGraph,
                    anchor_policy: AnchorPolicy = RANDOM_ANCHOR, seed: int = 0,
                    return_anchors: bool = False):
    """Append ``part`` to ``host`` and join them with a single bridging edge.

    Part node indices are shifted by ``host.num_nodes``.  An empty host simply
    becomes the part (no bridge is possible).
    """
    if part.num_nodes == 0:
        raise GraphError("cannot attach an empty part")
    if host.num_nodes and host.feature_dim != part.feature_dim:
        raise DimensionError(
            f"feature_dim mismatch: host {host.feature_dim}, part {part.feature_dim}")
    rng = rng_from(seed)
    offset = host.num_nodes
    edges = list(host.edges) + [(u + offset, v + offset) for u, v in part.edges]
    ha = pa = None
    if host.num_nodes:
        ha = anchor_policy.host_anchor
        if ha is None:
            ha = int(rng.integers(host.num_nodes))
        pa = anchor_policy.part_anchor
        if pa is None:
            pa = int(rng.integers(part.num_nodes))
        if not (0 <= ha < host.num_nodes and 0 <= pa < part.num_nodes):
            raise GraphError("anchor out of range")
        edges.append((ha, pa + offset))
    if host.num_nodes:
        feats = np.vstack([host.node_features, part.node_features])
    else:
        feats = part.node_features
    if host.node_tags is None and part.node_tags is None:
        tags = None
    else:
        tags = list(host.node_tags or ("",) * host.num_nodes) + list(part.node_tags or ("",) * part.num_nodes)
    directed = host.directed if host.num_nodes else part.directed
    out = AttributedGraph(offset + part.num_nodes, edges, directed, feats, tags)
    if return_anchors:
        return out, ha, pa
    return out


# ---------------------------------------------------------------------------
# Samples and datasets
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Provenance:
    causal_element_ids: tuple[str, ...] = ()
    confounder_element_ids: tuple[str, ...] = ()
    intervention_applied: bool = False
    sample_seed: int = 0
    # Free-form audit trail: confounder node sets, anchors, citation metadata ...
    extra: dict = field(default_factory=dict, compare=True, hash=False)

    def to_json(self) -> dict:
        return {
            "causal_element_ids": list(self.causal_element_ids),
            "confounder_element_ids": list(self.confounder_element_ids),
            "intervention_applied": self.intervention_applied,
            "sample_seed": self.sample_seed,
            "extra": self.extra,
        }

    @classmethod
    def from_json(cls, d: dict) -> "Provenance":
        return cls(tuple(d.get("causal_element_ids", ())),
                   tuple(d.get("confounder_element_ids", ())),
                   bool(d.get("intervention_applied", False)),
                   int(d.get("sample_seed", 0)),
                   dict(d.get("extra", {})))


@dataclass(frozen=True)
class GraphSample:
    graph: AttributedGraph
    label: int
    split: str
    provenance: Provenance = Provenance()
    id: int = 0

    def __post_init__(self):
        if self.split not in SPLITS:
            raise ValueError(f"unknown split {self.split!r}")

    def evolve(self, **changes) -> "GraphSample":
        return replace(self, **changes)


def config_digest(params: Any) -> str:
    """SHA-256 over the canonical JSON form of the generation parameters."""
    blob = json.dumps(params, sort_keys=True, separators=(",", ":"), default=_jsonable)
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()


def _jsonable(obj):
    if hasattr(obj, "to_json"):
        return obj.to_json()
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, (set, frozenset, tuple)):
        return list(obj)
    raise TypeError(f"not serialisable: {type(obj).__name__}")


@dataclass(frozen=True)
class Manifest:
    num_classes: int
    feature_dim: int
    split_counts: dict
    master_seed: int
    config_digest: str
    generator_version: str = GENERATOR_VERSION
    family: str = ""
    config: dict = field(default_factory=dict, hash=False)

    def to_json(self) -> dict:
        return {
            "num_classes": self.num_classes,
            "feature_dim": self.feature_dim,
            "split_counts": {s: int(self.split_counts.get(s, 0)) for s in SPLITS},
            "master_seed": self.master_seed,
            "config_digest": self.config_digest,
            "generator_version": self.generator_version,
            "family": self.family,
            "config": self.config,
        }

    @classmethod
    def from_json(cls, d: dict) -> "Manifest":
        return cls(int(d["num_classes"]), int(d["feature_dim"]),
                   {s: int(d["split_counts"].get(s, 0)) for s in SPLITS},
                   int(d["master_seed"]), str(d["config_digest"]),
                   str(d.get("generator_version", GENERATOR_VERSION)),
                   str(d.get("family", "")), dict(d.get("config", {})))


@dataclass(frozen=True)
class Dataset:
    samples: tuple[GraphSample, ...]
    manifest: Manifest

    def __post_init__(self):
        object.__setattr__(self, "samples", tuple(self.samples))

    def split(self, name: str) -> list[GraphSample]:
        return [s for s in self.samples if s.split == name]

    def realized_counts(self) -> dict:
        counts = {s: 0 for s in SPLITS}
        for s in self.samples:
            counts[s.split] += 1
        return counts

    def with_samples(self, samples: Iterable[GraphSample], **manifest_changes) -> "Dataset":
        samples = tuple(samples)
        counts = {s: 0 for s in SPLITS}
        for s in samples:
            counts[s.split] += 1
        manifest = replace(self.manifest, split_counts=counts, **manifest_changes)
        return Dataset(samples, manifest)

    def __len__(self):
        return len(self.samples)


def validate_dataset(ds: Dataset) -> list[str]:
    """Audit every sample; returns a list of human-readable problems (empty if clean)."""
    problems = []
    if ds.realized_counts() != {s: ds.manifest.split_counts.get(s, 0) for s in SPLITS}:
        problems.append(f"manifest counts {ds.manifest.split_counts} != realised {ds.realized_counts()}")
    for s in ds.samples:
        try:
            validate_graph(s.graph)
        except GraphError as exc:
            problems.append(f"sample {s.id}: {exc}")
        if not 0 <= s.label < ds.manifest.num_classes:
            problems.append(f"sample {s.id}: label {s.label} outside [0, {ds.manifest.num_classes})")
        if s.graph.num_nodes and s.graph.feature_dim != ds.manifest.feature_dim:
            problems.append(f"sample {s.id}: feature_dim {s.graph.feature_dim}")
    return problems
