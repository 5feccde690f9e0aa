"""RWG-Citation: metadata synthesis and sample assembly."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .features import (DISTRIBUTIONS, FeatureGenerator, generate_features, sequence_terms,
                       signed_log1p)
from .graph import AttributedGraph, GraphSample, Provenance, rng_from
from .molecular import GenerationError
from .rules import RULES, STRUCTURAL, LinkRule, apply_link_rule
from .specs import CausalSpec, SizeReserve, SpecError

TOPIC_DIM = 8

DEFAULT_CAUSAL = ("feature:hamiltonian", "feature:arithmetic", "feature:prime",
                  "feature:square", "feature:cube")
DEFAULT_NOISE = ("normal", "uniform", "exponential", "gamma", "laplace", "logistic", "rayleigh",
                 "gumbel")


@dataclass(frozen=True)
class CitationAssemblyConfig:
    node_range: tuple[int, int] = (15, 25)
    edge_range: tuple[int, int] = (20, 60)
    feature_dim: int = 5
    num_classes: int = 5
    # fraction of papers whose feature row comes from the class generator
    causal_fraction: float = 0.4
    noise_kinds: tuple[str, ...] = DEFAULT_NOISE
    rule_pool: tuple[str, ...] = RULES
    rules_per_sample: int = 2
    max_attempts: int = 64

    def __post_init__(self):
        for lo, hi in (self.node_range, self.edge_range):
            if lo > hi:
                raise SpecError(f"empty range [{lo}, {hi}]")
        if self.feature_dim < 2:
            raise SpecError("citation features need >= 2 channels (last one is reserved)")
        if self.num_classes < 2:
            raise SpecError("num_classes must be >= 2")
        for k in self.noise_kinds:
            if k not in DISTRIBUTIONS:
                raise SpecError(f"noise generator {k!r} is not a distribution")

    @property
    def causal_channels(self) -> int:
        return self.feature_dim - 1

    def to_json(self) -> dict:
        return {k: (list(v) if isinstance(v, tuple) else v) for k, v in self.__dict__.items()}

    @classmethod
    def from_json(cls, d: dict) -> "CitationAssemblyConfig":
        return cls(**{k: (tuple(v) if isinstance(v, list) else v) for k, v in d.items()})


def synthesize_metadata(n: int, rng: np.random.Generator) -> dict:
    """Per-paper metadata consumed by the link rules.

    Priors: citation counts NB(2, 0.1); 1-3 authors from a pool of max(4, n/2);
    Dirichlet(0.5) topics; years 1990-2024; Beta venue / credibility scores;
    planar locations in the unit square; team size 1 + Poisson(3).
    """
    pool = max(4, n // 2)
    loc = rng.random((n, 2))
    meta = {
        "num_nodes": n,
        "citation_count": rng.negative_binomial(2, 0.1, n).tolist(),
        "authors": [sorted(int(a) for a in rng.choice(pool, size=int(rng.integers(1, 4)), replace=False))
                    for _ in range(n)],
        "topic": rng.dirichlet(np.full(TOPIC_DIM, 0.5), n).tolist(),
        "year": rng.integers(1990, 2025, n).tolist(),
        "venue": rng.beta(2, 5, n).tolist(),
        "location": loc.tolist(),
        "region": (2 * (loc[:, 0] > 0.5) + (loc[:, 1] > 0.5)).astype(int).tolist(),
        "team_size": (1 + rng.poisson(3, n)).tolist(),
        "credibility": rng.beta(2, 2, n).tolist(),
        "lab": rng.integers(0, 3, n).tolist(),
        "generation": rng.integers(0, 4, n).tolist(),
        "field": rng.integers(0, 4, n).tolist(),
        "influence": rng.lognormal(0, 1, n).tolist(),
        "novelty": rng.random(n).tolist(),
        "reference_count": rng.poisson(20, n).tolist(),
        "object_score": rng.gamma(2, 1, n).tolist(),
        "open_access": (rng.random(n) < 0.4).tolist(),
    }
    return meta


def causal_rows(kind: str, dim: int) -> np.ndarray:
    return sequence_terms(FeatureGenerator(kind), 0, dim)


def assemble_citation_graph(config: CitationAssemblyConfig, causal: CausalSpec, seed: int,
                            label: int | None = None, reserve: SizeReserve = SizeReserve(),
                            split: str = "train", sample_id: int = 0) -> GraphSample:
    """Build one RWG-Citation sample.

    With a ``feature`` determinant a fraction of papers carry the label's
    sequence on channels ``0 .. dim-2``; the rest carry noise from a random
    distribution.  With a ``rule`` determinant the label's rule is always the
    first link rule applied.  The last channel stays zero for confounders.
    """
    if causal.determinant not in ("feature", "rule"):
        raise SpecError("citation samples need a feature or rule determinant")
    rng = rng_from(seed)
    if label is None:
        label = int(rng.integers(causal.num_classes))
    element = causal.element_for(label)
    lo_e, hi_e = config.edge_range[0], config.edge_range[1] - reserve.edges
    if hi_e < lo_e:
        raise GenerationError(f"reserve of {reserve.edges} edges leaves no room in {config.edge_range}")
    n = int(rng.integers(config.node_range[0], config.node_range[1] + 1))
    meta = synthesize_metadata(n, rng)
    d, c = config.feature_dim, config.causal_channels
    noise_kind = config.noise_kinds[int(rng.integers(len(config.noise_kinds)))]
    raw = np.zeros((n, d))
    raw[:, :c] = generate_features(FeatureGenerator(noise_kind), n, c, int(rng.integers(2**63)))
    extra = {"noise": noise_kind, "metadata": meta}
    causal_pool = {e.id for e in causal.elements} if causal.determinant == "rule" else set()
    if causal.determinant == "feature":
        k = max(1, int(round(config.causal_fraction * n)))
        nodes = sorted(int(v) for v in rng.choice(n, size=k, replace=False))
        row = causal_rows(element.id, c)
        raw[nodes, :c] = row
        extra["causal_nodes"] = nodes
        extra["causal_statistic"] = float(row.mean())
    feats = signed_log1p(raw)
    first_pool = [r for r in config.rule_pool if r not in STRUCTURAL and r not in causal_pool]
    any_pool = [r for r in config.rule_pool if r not in causal_pool]
    failure = "no attempt made"
    for attempt in range(config.max_attempts):
        if causal.determinant == "rule":
            chosen = [element.id]
        else:
            chosen = [first_pool[int(rng.integers(len(first_pool)))]]
        while len(chosen) < config.rules_per_sample:
            chosen.append(any_pool[int(rng.integers(len(any_pool)))])
        edges: list[tuple[int, int]] = []
        for r in chosen:
            edges += apply_link_rule(LinkRule(r), meta, int(rng.integers(2**63)), edges)
        if not lo_e <= len(edges) <= hi_e:
            failure = f"edge count {len(edges)} outside [{lo_e}, {hi_e}] with rules {chosen}"
            continue
        graph = AttributedGraph(n, sorted(edges), True, feats, ["paper"] * n)
        extra.update({"rules": chosen, "attempts": attempt + 1})
        if causal.determinant == "rule":
            extra["causal_statistic"] = float(label)
        prov = Provenance(causal_element_ids=(element.key,), sample_seed=int(seed), extra=extra)
        return GraphSample(graph, int(label), split, prov, sample_id)
    raise GenerationError(
        f"sample {sample_id}: constraints unsatisfied after {config.max_attempts} attempts; last: {failure}")
