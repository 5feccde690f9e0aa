"""RWG-Molecular: motif registry, motif variation and sample assembly."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import lru_cache
from importlib import resources

import numpy as np

from .connectors import KINDS, ConnectorKind, build_connector, MIN_SIZE
from .graph import (AttributedGraph, GraphSample, Provenance, attach_subgraph, rng_from)
from .specs import CausalSpec, SizeReserve, SpecError

ATOMS = ("C", "N", "O", "S", "H")


class GenerationError(RuntimeError):
    """A sample could not satisfy its size constraints within the attempt budget."""


class MotifLookupError(KeyError):
    pass


def atom_features(tags, feature_dim: int = 5) -> np.ndarray:
    """One-hot atom type per node over (C, N, O, S, H); extra dims stay zero."""
    out = np.zeros((len(tags), feature_dim))
    for i, t in enumerate(tags):
        k = ATOMS.index(t) if t in ATOMS else 0
        if k < feature_dim:
            out[i, k] = 1.0
    return out


@dataclass(frozen=True)
class MotifTemplate:
    motif_id: str
    name: str
    formula: str
    declared_node_count: int
    declared_edge_count: int
    template: AttributedGraph


@lru_cache(maxsize=None)
def _registry_doc() -> dict:
    text = resources.files("rwgkit.resources").joinpath("motifs.json").read_text("utf-8")
    return json.loads(text)


@lru_cache(maxsize=None)
def motif_registry() -> dict[str, MotifTemplate]:
    out = {}
    for m in _registry_doc()["motifs"]:
        g = AttributedGraph(m["declared_node_count"], [tuple(e) for e in m["edges"]], False,
                            atom_features(m["tags"]), m["tags"])
        out[m["motif_id"]] = MotifTemplate(m["motif_id"], m["name"], m["formula"],
                                           m["declared_node_count"], m["declared_edge_count"], g)
    return out


def edge_count_discrepancies() -> list[dict]:
    """Motifs whose template edge count differs from the tabulated value, with the reason."""
    return list(_registry_doc()["edge_count_discrepancies"])


def get_motif(motif_id: str) -> MotifTemplate:
    try:
        return motif_registry()[motif_id]
    except KeyError:
        raise MotifLookupError(f"unknown motif {motif_id!r}") from None


@lru_cache(maxsize=None)
def _cycle_edges(motif_id: str) -> tuple[tuple[int, int], ...]:
    g = get_motif(motif_id).template
    out = []
    for e in g.edges:
        if g.with_edges([x for x in g.edges if x != e]).is_connected():
            out.append(e)
    return tuple(out)


def _with_tags_dim(g: AttributedGraph, feature_dim: int) -> AttributedGraph:
    if feature_dim == g.feature_dim:
        return g
    return g.with_features(atom_features(g.node_tags, feature_dim))


def instantiate_motif(motif_id: str, variation_seed: int = 0, variation_rate: float = 0.0,
                      feature_dim: int = 5) -> AttributedGraph:
    """Return the motif template, perturbed by one edge with probability ``variation_rate``.

    Removals only touch cycle edges so the motif stays connected.
    """
    tpl = get_motif(motif_id).template
    rng = rng_from(variation_seed)
    if variation_rate <= 0 or rng.random() >= variation_rate:
        return _with_tags_dim(tpl, feature_dim)
    n = tpl.num_nodes
    present = set(tpl.edges)
    addable = [(u, v) for u in range(n) for v in range(u + 1, n) if (u, v) not in present]
    removable = list(_cycle_edges(motif_id))
    options = [op for op, pool in (("add", addable), ("remove", removable)) if pool]
    if not options:
        return _with_tags_dim(tpl, feature_dim)
    op = options[int(rng.integers(len(options)))]
    if op == "add":
        edges = list(tpl.edges) + [addable[int(rng.integers(len(addable)))]]
    else:
        drop = removable[int(rng.integers(len(removable)))]
        edges = [e for e in tpl.edges if e != drop]
    return _with_tags_dim(tpl.with_edges(edges), feature_dim)


@dataclass(frozen=True)
class MoleculeAssemblyConfig:
    motif_pool: tuple[str, ...] = tuple(sorted(_registry_doc()["motifs"][i]["motif_id"]
                                               for i in range(26)))
    connector_kinds: tuple[str, ...] = KINDS
    connector_size: tuple[int, int] = (3, 6)
    connector_branch: tuple[int, int] = (0, 3)
    node_range: tuple[int, int] = (50, 80)
    edge_range: tuple[int, int] = (60, 120)
    feature_dim: int = 5
    num_classes: int = 5
    motif_variation_rate: float = 0.1
    feature_noise: float = 0.0
    max_attempts: int = 64
    fillers: bool = True

    def __post_init__(self):
        for lo, hi in (self.node_range, self.edge_range):
            if lo > hi:
                raise SpecError(f"empty range [{lo}, {hi}]")
        if self.num_classes < 2:
            raise SpecError("num_classes must be >= 2")

    def to_json(self) -> dict:
        return {k: (list(v) if isinstance(v, tuple) else v) for k, v in self.__dict__.items()}

    @classmethod
    def from_json(cls, d: dict) -> "MoleculeAssemblyConfig":
        kw = {k: (tuple(v) if isinstance(v, list) else v) for k, v in d.items()}
        return cls(**kw)


def _span(start: int, g: AttributedGraph) -> list[int]:
    return [start, g.num_nodes]


def _draw_connector(cfg: MoleculeAssemblyConfig, rng: np.random.Generator) -> ConnectorKind:
    kind = cfg.connector_kinds[int(rng.integers(len(cfg.connector_kinds)))]
    lo, hi = cfg.connector_size
    size = max(int(rng.integers(lo, hi + 1)), MIN_SIZE[kind])
    branch = int(rng.integers(cfg.connector_branch[0], cfg.connector_branch[1] + 1))
    return ConnectorKind(kind, size, branch)


def assemble_molecule(config: MoleculeAssemblyConfig, causal: CausalSpec, seed: int,
                      label: int | None = None, reserve: SizeReserve = SizeReserve(),
                      split: str = "train", sample_id: int = 0) -> GraphSample:
    """Build one RWG-Molecular sample whose label is fixed by its causal motif.

    The sample holds one connector, exactly one instance of the label's causal
    motif, and filler motifs until the node count lands in range.  ``reserve``
    shrinks the ranges to leave room for a confounder attached afterwards.
    """
    if causal.determinant != "motif":
        raise SpecError("molecular samples need a motif determinant")
    causal_ids = [e.id for e in causal.elements]
    for m in causal_ids:
        get_motif(m)
    rng = rng_from(seed)
    if label is None:
        label = int(rng.integers(causal.num_classes))
    fillers = [m for m in config.motif_pool if m not in causal_ids] if config.fillers else []
    lo_n = config.node_range[0] - reserve.min_nodes
    hi_n = config.node_range[1] - reserve.nodes
    lo_e = config.edge_range[0] - reserve.min_edges
    hi_e = config.edge_range[1] - reserve.edges
    if hi_n < max(lo_n, 1) or hi_e < lo_e:
        raise GenerationError(f"reserve {reserve} leaves no room in {config.node_range}/{config.edge_range}")
    filler_sizes = {m: get_motif(m).declared_node_count for m in fillers}
    failure = "no attempt made"
    for attempt in range(config.max_attempts):
        target = int(rng.integers(max(lo_n, 1), hi_n + 1))
        conn = _draw_connector(config, rng)
        host = build_connector(conn, int(rng.integers(2**63)), config.feature_dim)
        elements = [{"key": f"connector:{conn.kind}:{conn.size}:{conn.branch}", "role": "connector",
                     "span": [0, host.num_nodes]}]
        motif = instantiate_motif(causal_ids[label], int(rng.integers(2**63)),
                                  config.motif_variation_rate, config.feature_dim)
        start = host.num_nodes
        host = attach_subgraph(host, motif, seed=int(rng.integers(2**63)))
        elements.append({"key": f"motif:{causal_ids[label]}", "role": "causal",
                         "span": _span(start, host)})
        while host.num_nodes < target:
            room = hi_n - host.num_nodes
            fits = [m for m in fillers if filler_sizes[m] <= room]
            if not fits:
                break
            # prefer fillers that do not overshoot the target
            under = [m for m in fits if filler_sizes[m] <= target - host.num_nodes] or fits
            m = under[int(rng.integers(len(under)))]
            part = instantiate_motif(m, int(rng.integers(2**63)), config.motif_variation_rate,
                                     config.feature_dim)
            start = host.num_nodes
            host = attach_subgraph(host, part, seed=int(rng.integers(2**63)))
            elements.append({"key": f"motif:{m}", "role": "filler", "span": _span(start, host)})
        n, e = host.num_nodes, host.num_edges
        if not lo_n <= n <= hi_n:
            failure = f"node count {n} outside [{lo_n}, {hi_n}]"
            continue
        if not lo_e <= e <= hi_e:
            failure = f"edge count {e} outside [{lo_e}, {hi_e}]"
            continue
        feats = host.node_features
        if config.feature_noise > 0:
            feats = feats + config.feature_noise * rng.standard_normal(feats.shape)
            host = host.with_features(feats)
        prov = Provenance(
            causal_element_ids=(f"motif:{causal_ids[label]}",),
            sample_seed=int(seed),
            extra={"elements": elements, "attempts": attempt + 1},
        )
        return GraphSample(host, int(label), split, prov, sample_id)
    raise GenerationError(
        f"sample {sample_id}: constraints unsatisfied after {config.max_attempts} attempts; last: {failure}")
