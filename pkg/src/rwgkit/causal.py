"""Confounder injection, the intervention operator and merge-validity checks."""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from decimal import ROUND_HALF_UP, Decimal

import numpy as np

from .connectors import ConnectorKind, build_connector, connector_counts
from .features import DISTRIBUTIONS, FeatureGenerator, generate_features, signed_log1p
from .graph import (AnchorPolicy, AttributedGraph, Dataset, GraphSample, SeedStream,
                    attach_subgraph, config_digest, rng_from)
from .molecular import atom_features, get_motif, instantiate_motif
from .rules import LinkRule, apply_link_rule
from .specs import CausalSpec, ConfounderSpec, ElementRef, SizeReserve, SpecError

CANONICAL_MOLECULAR = ElementRef("connector", "path", 3, 0)


class InterventionError(RuntimeError):
    pass


# ---------------------------------------------------------------------------
# Confounder elements
# ---------------------------------------------------------------------------

def _element_counts(ref: ElementRef) -> tuple[int, int]:
    if ref.kind == "motif":
        t = get_motif(ref.id).template
        return t.num_nodes, t.num_edges
    if ref.kind == "connector":
        return connector_counts(ref.id, ref.size, ref.branch)
    raise SpecError(f"{ref.key} is not a structural element")


def _structural_parts(conf: ConfounderSpec) -> list[ElementRef]:
    return [e for e in conf.elements if e.kind in ("motif", "connector")]


def block_counts(parts: list[ElementRef]) -> tuple[int, int]:
    """Nodes and internal edges of the parts chained into one block."""
    counts = [_element_counts(p) for p in parts]
    return sum(c[0] for c in counts), sum(c[1] for c in counts) + len(parts) - 1


def confounder_reserve(conf: ConfounderSpec | None, family: str) -> SizeReserve:
    """Room a base sample must leave for the confounder, its decoy, or the canonical element."""
    if conf is None:
        return SizeReserve()
    if family == "citation":
        has_rule = any(e.kind == "rule" for e in conf.elements)
        return SizeReserve(0, conf.max_edges if has_rule else 0)
    parts = _structural_parts(conf)
    if not parts:
        return SizeReserve()
    if conf.combine == "all":
        options = [block_counts(parts)]
    else:
        options = [block_counts([p]) for p in parts]
    canon = block_counts([CANONICAL_MOLECULAR])
    nodes = max([o[0] for o in options] + [canon[0]])
    edges = max([o[1] + 1 for o in options] + [canon[1] + 1])
    # with combine="one" blocks differ in size; decoys only guarantee the smallest
    return SizeReserve(nodes, edges, decoy=conf.decoy, floor_nodes=min(o[0] for o in options),
                       floor_edges=min(o[1] + 1 for o in options))


def element_graph(ref: ElementRef, seed: int, feature_dim: int) -> AttributedGraph:
    if ref.kind == "motif":
        return instantiate_motif(ref.id, 0, 0.0, feature_dim)
    if ref.kind == "connector":
        return build_connector(ConnectorKind(ref.id, ref.size, ref.branch), seed, feature_dim)
    raise SpecError(f"{ref.key} cannot be realised as a subgraph")


def _chain(parts: list[AttributedGraph], rng) -> AttributedGraph:
    block = parts[0]
    for p in parts[1:]:
        block = attach_subgraph(block, p, seed=int(rng.integers(2**63)))
    return block


def random_block(num_nodes: int, num_edges: int, seed: int, feature_dim: int) -> AttributedGraph:
    """Random connected carbon graph with exactly the given node and edge counts."""
    if num_edges < num_nodes - 1 or num_edges > num_nodes * (num_nodes - 1) // 2:
        raise SpecError(f"no connected simple graph with {num_nodes} nodes and {num_edges} edges")
    rng = rng_from(seed)
    edges = {(int(rng.integers(v)), v) for v in range(1, num_nodes)}
    missing = [(u, v) for u in range(num_nodes) for v in range(u + 1, num_nodes) if (u, v) not in edges]
    extra = num_edges - len(edges)
    if extra:
        for k in rng.choice(len(missing), size=extra, replace=False):
            edges.add(missing[int(k)])
    tags = ["C"] * num_nodes
    return AttributedGraph(num_nodes, sorted(edges), False, atom_features(tags, feature_dim), tags)


def check_disjoint(causal: CausalSpec | None, conf: ConfounderSpec) -> None:
    if causal is None:
        return
    clash = {e.key for e in causal.elements} & {e.key for e in conf.elements}
    if clash:
        raise SpecError(f"confounder element(s) {sorted(clash)} collide with the causal determinant")


# ---------------------------------------------------------------------------
# Injection
# ---------------------------------------------------------------------------

def attachment_rate(ds: Dataset, conf: ConfounderSpec) -> float:
    """Overall share of training samples the train policy confounds (in expectation)."""
    train = ds.split("train")
    if not train:
        return 0.0
    biased = sum(1 for s in train if s.label == conf.biased_class)
    return conf.bias * biased / len(train)


def _attach_molecular(s: GraphSample, conf: ConfounderSpec, rng, as_decoy: bool) -> GraphSample:
    parts = _structural_parts(conf)
    if conf.combine == "one":
        parts = [parts[int(rng.integers(len(parts)))]]
    g = s.graph
    pieces = [element_graph(p, int(rng.integers(2**63)), g.feature_dim) for p in parts]
    block = _chain(pieces, rng)
    if as_decoy:
        block = random_block(block.num_nodes, block.num_edges, int(rng.integers(2**63)), g.feature_dim)
    start = g.num_nodes
    out, host_anchor, part_anchor = attach_subgraph(g, block, seed=int(rng.integers(2**63)),
                                                    return_anchors=True)
    slot = {"kind": "decoy" if as_decoy else "confounder", "span": [start, out.num_nodes],
            "host_anchor": host_anchor, "part_anchor": part_anchor,
            "elements": [p.key for p in parts]}
    extra = dict(s.provenance.extra, confounder=slot)
    ids = () if as_decoy else tuple(p.key for p in parts)
    prov = _replace_prov(s.provenance, confounder_element_ids=ids, extra=extra)
    return s.evolve(graph=out, provenance=prov)


def _attach_citation(s: GraphSample, conf: ConfounderSpec, rng) -> GraphSample:
    g = s.graph
    feats = np.array(g.node_features)
    channel = conf.feature_channel % g.feature_dim
    slot = {"kind": "confounder", "channel": None, "edges": []}
    keys = []
    edges = list(g.edges)
    for ref in conf.elements:
        if ref.kind == "feature":
            if ref.id not in DISTRIBUTIONS:
                raise SpecError(f"feature confounder {ref.key} must be a distribution generator")
            col = generate_features(FeatureGenerator(ref.id), g.num_nodes, 1, int(rng.integers(2**63)))
            feats[:, channel] = signed_log1p(col[:, 0])
            slot["channel"] = channel
        elif ref.kind == "rule":
            meta = s.provenance.extra.get("metadata")
            if meta is None:
                raise SpecError("rule confounders need per-node metadata in provenance")
            new = apply_link_rule(LinkRule(ref.id), meta, int(rng.integers(2**63)), edges)
            if len(new) > conf.max_edges:
                keep = sorted(int(k) for k in rng.choice(len(new), size=conf.max_edges, replace=False))
                new = [new[k] for k in keep]
            edges += new
            slot["edges"] = sorted([list(e) for e in new])
        else:
            raise SpecError(f"citation confounders take feature or rule elements, not {ref.key}")
        keys.append(ref.key)
    out = AttributedGraph(g.num_nodes, sorted(edges), g.directed, feats, g.node_tags)
    extra = dict(s.provenance.extra, confounder=slot)
    prov = _replace_prov(s.provenance, confounder_element_ids=tuple(keys), extra=extra)
    return s.evolve(graph=out, provenance=prov)


def _replace_prov(p, **changes):
    return replace(p, **changes)


def inject_confounder(ds: Dataset, conf: ConfounderSpec, seed: int, causal: CausalSpec | None = None,
                      eval_rate: float | None = None) -> Dataset:
    """Attach ``conf`` with a train-only class bias.

    Train: each sample of ``biased_class`` is confounded with probability
    ``bias``; other classes never are.  Val/test: every sample is confounded
    with the same overall probability (or ``eval_rate`` when given),
    independent of its class.  Labels, causal elements and counts are kept.
    """
    check_disjoint(causal, conf)
    family = ds.manifest.family
    rate = attachment_rate(ds, conf) if eval_rate is None else float(eval_rate)
    if not 0.0 <= rate <= 1.0:
        raise SpecError(f"eval_rate {rate} outside [0, 1]")
    stream = SeedStream(seed)
    out = []
    for s in ds.samples:
        rng = stream.rng(s.id, "confounder")
        coin = rng.random()
        if s.split == "train":
            hit = s.label == conf.biased_class and coin < conf.bias
        else:
            hit = coin < rate
        if family == "citation":
            out.append(_attach_citation(s, conf, rng) if hit else s)
        elif hit or conf.decoy:
            out.append(_attach_molecular(s, conf, rng, as_decoy=not hit))
        else:
            out.append(s)
    cfg = dict(ds.manifest.config, confounder=conf.to_json(), confounder_seed=seed, eval_rate=eval_rate)
    return ds.with_samples(out, config=cfg, config_digest=config_digest(cfg))


def is_confounded(s: GraphSample) -> bool:
    return bool(s.provenance.confounder_element_ids)


# ---------------------------------------------------------------------------
# Intervention
# ---------------------------------------------------------------------------

def canonical_graph(feature_dim: int) -> AttributedGraph:
    return element_graph(CANONICAL_MOLECULAR, 0, feature_dim)


def intervene(sample: GraphSample, conf: ConfounderSpec | None = None,
              canonical: ElementRef = CANONICAL_MOLECULAR) -> GraphSample:
    """do(confounder := canonical element).

    Molecular: the recorded confounder (or decoy) nodes are removed and the
    canonical block is attached at the recorded host anchor.  Citation: the
    confounder channel is zeroed and the confounder edges are dropped.
    Idempotent; samples without a confounder only get the flag.
    """
    prov = sample.provenance
    slot = prov.extra.get("confounder")
    if slot is None:
        if prov.confounder_element_ids:
            raise InterventionError(f"sample {sample.id}: confounder ids without a recorded location")
        return sample.evolve(provenance=_replace_prov(prov, intervention_applied=True))
    g = sample.graph
    if "span" in slot:
        a, b = slot["span"]
        if not (0 <= a <= b <= g.num_nodes) or slot["host_anchor"] >= a:
            raise InterventionError(f"sample {sample.id}: corrupt confounder span {slot['span']}")
        base, _ = g.remove_nodes(range(a, b))
        part = element_graph(canonical, 0, g.feature_dim)
        out = attach_subgraph(base, part, AnchorPolicy(slot["host_anchor"], 0))
        new_slot = dict(slot, span=[base.num_nodes, out.num_nodes], part_anchor=0,
                        canonical=canonical.key)
    else:
        feats = np.array(g.node_features)
        if slot.get("channel") is not None:
            feats[:, slot["channel"]] = 0.0
        drop = {tuple(e) for e in slot.get("edges", [])}
        out = AttributedGraph(g.num_nodes, [e for e in g.edges if e not in drop], g.directed,
                              feats, g.node_tags)
        new_slot = dict(slot, edges=[], canonical="zero-channel")
    extra = dict(prov.extra, confounder=new_slot)
    return sample.evolve(graph=out, provenance=_replace_prov(prov, intervention_applied=True, extra=extra))


def round_half_up(x: float) -> int:
    return int(Decimal(repr(x)).quantize(Decimal(1), rounding=ROUND_HALF_UP))


def violate_merge(ds: Dataset, conf: ConfounderSpec | None, p: float, seed: int = 0) -> frozenset[int]:
    """Ids of confounded samples exempted from intervention: round-half-up(p * N) of them."""
    if not 0.0 <= p <= 1.0:
        raise SpecError(f"p = {p} outside [0, 1]")
    ids = sorted(s.id for s in ds.samples if is_confounded(s))
    m = round_half_up(p * len(ids))
    if m == 0:
        return frozenset()
    order = rng_from(SeedStream(seed).derive(0, "violate_merge")).permutation(len(ids))
    return frozenset(ids[int(k)] for k in order[:m])


def apply_intervention(ds: Dataset, conf: ConfounderSpec | None = None,
                       exempt: frozenset[int] = frozenset(),
                       canonical: ElementRef = CANONICAL_MOLECULAR) -> Dataset:
    out = [s if s.id in exempt else intervene(s, conf, canonical) for s in ds.samples]
    cfg = dict(ds.manifest.config, intervention={"canonical": canonical.key, "exempt": len(exempt)})
    return ds.with_samples(out, config=cfg, config_digest=config_digest(cfg))


# ---------------------------------------------------------------------------
# Micro-level SCM and merge validity
# ---------------------------------------------------------------------------

X_ROLES = ("caus", "asoc", "cfd", "independent")


@dataclass(frozen=True)
class MicroSCM:
    """Vertex-level causal DAG over exogenous (U), graph (X) and label (Y) variables."""

    roles: dict          # vertex -> "U" | "X" | "Y"
    edges: tuple         # directed (parent, child) pairs
    x_roles: dict = field(default_factory=dict)
    no_exogenous: frozenset = frozenset()

    def __post_init__(self):
        object.__setattr__(self, "edges", tuple(tuple(e) for e in self.edges))
        for v, r in self.roles.items():
            if r not in ("U", "X", "Y"):
                raise SpecError(f"vertex {v!r}: unknown role {r!r}")
        for a, b in self.edges:
            if a not in self.roles or b not in self.roles:
                raise SpecError(f"edge ({a!r}, {b!r}) uses an unknown vertex")
        if self._cyclic():
            raise SpecError("micro SCM must be acyclic")
        for v in self.x_vertices:
            if v not in self.no_exogenous and not any(self.roles[p] == "U" for p in self.parents(v)):
                raise SpecError(f"X vertex {v!r} lacks an exogenous parent (flag it in no_exogenous)")
        caus = {v for v, r in self.x_roles.items() if r == "caus"}
        if self.x_roles and caus != self.label_parents:
            raise SpecError(f"X^caus {sorted(caus)} != parents of Y {sorted(self.label_parents)}")

    @classmethod
    def from_dag(cls, x_vertices, edges, y_parents, y: str = "Y") -> "MicroSCM":
        """Build an SCM whose X vertices have no exogenous parents; Y is a sink."""
        roles = {v: "X" for v in x_vertices}
        roles[y] = "Y"
        all_edges = list(edges) + [(p, y) for p in y_parents]
        return cls(roles, tuple(all_edges), no_exogenous=frozenset(x_vertices))

    def _cyclic(self) -> bool:
        indeg = {v: 0 for v in self.roles}
        for _, b in self.edges:
            indeg[b] += 1
        queue = [v for v, d in indeg.items() if d == 0]
        seen = 0
        while queue:
            v = queue.pop()
            seen += 1
            for a, b in self.edges:
                if a == v:
                    indeg[b] -= 1
                    if indeg[b] == 0:
                        queue.append(b)
        return seen != len(self.roles)

    @property
    def x_vertices(self) -> list:
        return [v for v, r in self.roles.items() if r == "X"]

    @property
    def label_vertices(self) -> list:
        return [v for v, r in self.roles.items() if r == "Y"]

    def parents(self, v) -> set:
        return {a for a, b in self.edges if b == v}

    def children(self, v) -> set:
        return {b for a, b in self.edges if a == v}

    @property
    def label_parents(self) -> set:
        ys = set(self.label_vertices)
        return {a for a, b in self.edges if b in ys and self.roles[a] == "X"}


@dataclass(frozen=True)
class PartitionSpec:
    blocks: tuple  # tuple of (block_id, frozenset of X vertices)

    def __post_init__(self):
        blocks = []
        for i, b in enumerate(self.blocks):
            if isinstance(b, tuple) and len(b) == 2 and isinstance(b[1], (set, frozenset, list, tuple)):
                blocks.append((b[0], frozenset(b[1])))
            else:
                blocks.append((f"s{i}", frozenset(b)))
        object.__setattr__(self, "blocks", tuple(blocks))

    @classmethod
    def singletons(cls, vertices) -> "PartitionSpec":
        return cls(tuple((f"s{i}", frozenset([v])) for i, v in enumerate(vertices)))


@dataclass(frozen=True)
class Violation:
    condition: int
    block: str
    vertex: object = None
    detail: str = ""


def check_merge_validity(scm: MicroSCM, part: PartitionSpec) -> list[Violation]:
    """Merge-validity conditions; an empty list means the partition is valid.

    Condition 1: a block acting as a parent of Y (it holds some member of
    Pa(Y)) must not contain both a parent and a child of any outside vertex.
    Condition 2: parents of Y may not be merged with other vertices.
    """
    xs = set(scm.x_vertices)
    seen: set = set()
    for _, b in part.blocks:
        if not b:
            raise SpecError("empty partition block")
        if b & seen:
            raise SpecError(f"blocks overlap on {sorted(map(str, b & seen))}")
        seen |= b
    if seen != xs:
        raise SpecError(f"partition does not cover X exactly (missing {sorted(map(str, xs - seen))}, "
                        f"extra {sorted(map(str, seen - xs))})")
    pa_y = scm.label_parents
    out = []
    for bid, b in part.blocks:
        if b & pa_y:
            for v in sorted(xs - b, key=str):
                if scm.parents(v) & b and scm.children(v) & b:
                    out.append(Violation(1, bid, v, f"{v} has a parent and a child inside {bid}"))
        if b & pa_y and b - pa_y:
            out.append(Violation(2, bid, None, f"{bid} mixes X^caus with other vertices"))
    return out
