import numpy as np
import pytest

from rwgkit.citation import CitationAssemblyConfig, assemble_citation_graph
from rwgkit.generate import DatasetRecipe, default_recipe, generate_dataset
from rwgkit.graph import validate_graph
from rwgkit.molecular import GenerationError
from rwgkit.specs import CausalSpec, SizeReserve

CAUSAL = CausalSpec("feature", ("feature:hamiltonian", "feature:arithmetic", "feature:prime",
                                "feature:square", "feature:cube"))


def test_paper_default_envelope_and_splits():
    ds = generate_dataset(default_recipe("citation", seed=3, bias=None))
    assert {sp: len(ds.split(sp)) for sp in ("train", "val", "test")} == {
        "train": 1500, "val": 200, "test": 200}
    for s in ds.samples:
        assert 15 <= s.graph.num_nodes <= 25
        assert 20 <= s.graph.num_edges <= 60
        assert s.graph.directed
        validate_graph(s.graph)
        assert np.all(s.graph.node_features[:, -1] == 0.0)


def test_identical_seeds_identical_samples():
    cfg = CitationAssemblyConfig()
    a = assemble_citation_graph(cfg, CAUSAL, seed=77, label=2)
    b = assemble_citation_graph(cfg, CAUSAL, seed=77, label=2)
    assert a == b
    c = assemble_citation_graph(cfg, CAUSAL, seed=78, label=2)
    assert a != c


def test_first_rule_is_non_structural():
    from rwgkit.rules import STRUCTURAL
    cfg = CitationAssemblyConfig()
    for i in range(30):
        s = assemble_citation_graph(cfg, CAUSAL, seed=i, label=i % 5)
        assert s.provenance.extra["rules"][0] not in STRUCTURAL


def _stump_accuracy(x, y):
    """1.0 when a multi-threshold stump on x fits y perfectly, else 0.0."""
    # perfect separation holds iff the per-class value ranges do not interleave
    groups = {}
    for v, lab in zip(x, y):
        groups.setdefault(lab, []).append(v)
    spans = sorted((min(v), max(v), lab) for lab, v in groups.items())
    clean = all(spans[i][1] < spans[i + 1][0] for i in range(len(spans) - 1))
    return 1.0 if clean else 0.0


def test_decision_stump_separates_clean_classes():
    recipe = DatasetRecipe("citation", CitationAssemblyConfig(), CAUSAL,
                           {"train": 300, "val": 0, "test": 0}, master_seed=5)
    ds = generate_dataset(recipe)
    x = np.array([s.provenance.extra["causal_statistic"] for s in ds.samples])
    y = np.array([s.label for s in ds.samples])
    assert _stump_accuracy(x, y) == 1.0


def test_causal_rows_written_on_recorded_nodes():
    cfg = CitationAssemblyConfig()
    s = assemble_citation_graph(cfg, CAUSAL, seed=4, label=3)  # square
    rows = s.graph.node_features[s.provenance.extra["causal_nodes"], :4]
    expected = np.sign([1, 4, 9, 16]) * np.log1p([1, 4, 9, 16])
    assert np.allclose(rows, expected)
    assert len(s.provenance.extra["causal_nodes"]) == max(1, round(0.4 * s.graph.num_nodes))


def test_rule_determinant_uses_label_rule_first():
    causal = CausalSpec("rule", ("rule:high_citation_count", "rule:temporal"))
    cfg = CitationAssemblyConfig(num_classes=2)
    for label in (0, 1):
        s = assemble_citation_graph(cfg, causal, seed=label, label=label)
        assert s.provenance.extra["rules"][0] == causal.elements[label].id
        assert causal.elements[1 - label].id not in s.provenance.extra["rules"]


def test_unsatisfiable_edges_raise():
    cfg = CitationAssemblyConfig(edge_range=(500, 600), max_attempts=3)
    with pytest.raises(GenerationError, match="3 attempts"):
        assemble_citation_graph(cfg, CAUSAL, seed=0, label=0)


def test_reserve_shrinks_edge_budget():
    cfg = CitationAssemblyConfig()
    for i in range(20):
        s = assemble_citation_graph(cfg, CAUSAL, seed=i, label=0, reserve=SizeReserve(0, 10))
        assert s.graph.num_edges <= 50
