"""Acceptance suite: one verdict line per criterion, printed and summarised at the end.

The experiment criteria (8-12) train real models and take several minutes each.
"""

import itertools
import random
import time

import numpy as np
import pytest
import torch

from acceptance_report import record
from engine_helpers import max_fd_error, random_batch, random_sample, small_model
from oracles import (MOTIF_TABLE, all_edge_sets, all_labeled_dags, maximal_clique_count_bruteforce,
                     merge_disagreements, upper_triangular_dags)
from rwgkit.bounds import (PartiallyDirectedGraph, UndirectedGraph, atomic_bound_from_graph,
                          maximal_clique_count, nonatomic_bound)
from rwgkit.engine import BACKBONES, conditional_kl, cross_entropy, forward
from rwgkit.generate import default_recipe, generate_dataset
from rwgkit.graph import AttributedGraph, GraphSample
from rwgkit.harness import cli
from rwgkit.harness.config import config_from_dict
from rwgkit.harness.report import check_aggregates, write_result
from rwgkit.harness.scenarios import (run_bias_sweep, run_pure_causal, run_rec_comparison,
                                      run_three_scenario, run_violation_sweep)
from rwgkit.io import read_dataset
from rwgkit.molecular import edge_count_discrepancies, motif_registry
from rwgkit.rec import RecGate, gamma, mask_scale

SEEDS3 = [1, 2, 3]


def scenario(name, tmp_path_factory, **doc):
    cfg = config_from_dict(dict({"scenario": name}, **doc))
    t0 = time.perf_counter()
    res = {"three-scenario": run_three_scenario, "bias-sweep": run_bias_sweep,
           "violation-sweep": run_violation_sweep, "pure-causal": run_pure_causal,
           "rec-comparison": run_rec_comparison}[name](cfg)
    elapsed = time.perf_counter() - t0
    out = tmp_path_factory.mktemp(name)
    write_result(res, out, cfg.to_json())
    return res, elapsed, check_aggregates(out / "raw.csv", out / "aggregate.csv")


# -- 1 -----------------------------------------------------------------------

@pytest.fixture(scope="module")
def generated_42(tmp_path_factory):
    root = tmp_path_factory.mktemp("gen42")
    times = []
    for d in ("a", "b"):
        t0 = time.perf_counter()
        code = cli.main(["gen", "molecular", "--seed", "42", "--out", str(root / d)])
        times.append(time.perf_counter() - t0)
        assert code == 0
    return root, times


def test_criterion_01_determinism(generated_42):
    root, times = generated_42
    same = all((root / "a" / n).read_bytes() == (root / "b" / n).read_bytes()
               for n in ("manifest.json", "samples.jsonl"))
    count = len(read_dataset(root / "a"))
    ok = record(1, "gen determinism", {"byte-identical": same, "1900 samples": count == 1900,
                                       "runtime < 30 s": max(times) < 30},
                f"identical={same}, samples={count}, runtimes={times[0]:.1f}s/{times[1]:.1f}s")
    assert ok


# -- 2 -----------------------------------------------------------------------

def _conformance(ds, nodes, edges):
    bad = [s.id for s in ds.samples if not (nodes[0] <= s.graph.num_nodes <= nodes[1]
                                            and edges[0] <= s.graph.num_edges <= edges[1])]
    return bad, ds.realized_counts()


def test_criterion_02_conformance(generated_42):
    mol = read_dataset(generated_42[0] / "a")
    cit = generate_dataset(default_recipe("citation", 42))
    bad_m, counts_m = _conformance(mol, (50, 80), (60, 120))
    bad_c, counts_c = _conformance(cit, (15, 25), (20, 60))
    splits = {"train": 1500, "val": 200, "test": 200}
    ok = record(2, "generator conformance",
                {"molecular envelope": not bad_m, "citation envelope": not bad_c,
                 "molecular splits": counts_m == splits, "citation splits": counts_c == splits},
                f"molecular out-of-range={len(bad_m)}/{len(mol)}, citation out-of-range={len(bad_c)}/{len(cit)}, "
                f"splits {counts_m['train']}/{counts_m['val']}/{counts_m['test']}")
    assert ok


# -- 3 -----------------------------------------------------------------------

def test_criterion_03_motif_registry():
    reg = {m.name: m for m in motif_registry().values()}
    node_bad = [n for n, nodes, _ in MOTIF_TABLE if n not in reg or reg[n].template.num_nodes != nodes]
    edge_mismatch = {mid for mid, m in motif_registry().items() if m.template.num_edges != m.declared_edge_count}
    declared_bad = [n for n, _, e in MOTIF_TABLE if n in reg and reg[n].declared_edge_count != e]
    listed = {d["motif_id"] for d in edge_count_discrepancies()}
    ok = record(3, "motif registry",
                {"26 templates": len(reg) == 26, "node counts": not node_bad,
                 "declared edges": not declared_bad, "discrepancies listed": listed == edge_mismatch},
                f"{len(reg)} templates, node mismatches={len(node_bad)}, "
                f"edge mismatches={len(edge_mismatch)} all documented={listed == edge_mismatch}")
    assert ok


# -- 4 -----------------------------------------------------------------------

def test_criterion_04_rec_math():
    g0, g10 = gamma(0), gamma(10)
    floor = min(gamma(t) for t in range(0, 5000, 7))
    gate = RecGate(6, torch.Generator().manual_seed(0))
    with torch.no_grad():
        gate.out.weight.normal_(0, 2, generator=torch.Generator().manual_seed(1))
        gate.out.bias.fill_(-0.3)
        h = torch.randn((100_000, 6), dtype=torch.float64, generator=torch.Generator().manual_seed(2)) * 4
        s = mask_scale(h, gate, 0.2)
    in_open = bool(torch.all(s > 0) and torch.all(s < 1))
    worst = 0.0
    for bb in BACKBONES:
        errs = max_fd_error(small_model(bb, rec=True, seed=3), random_batch(11)[1])
        worst = max(worst, max(v for k, v in errs.items() if ".gate." in k))
    ok = record(4, "REC math",
                {"gamma(0)=1": g0 == 1.0, "floor 0.2": floor == 0.2, "gamma(10)": abs(g10 - 0.904382) <= 1e-6,
                 "mask in (0,1)": in_open, "gate FD": worst <= 1e-4},
                f"gamma(10)={g10:.7f}, floor={floor}, mask range=[{s.min().item():.3g}, {s.max().item():.3g}], "
                f"max gate FD rel err={worst:.2e}")
    assert ok


# -- 5 -----------------------------------------------------------------------

def test_criterion_05_ce_kl_identity():
    worst = 0.0
    for seed in range(100):
        g = torch.Generator().manual_seed(seed)
        probs = torch.softmax(torch.randn((16, 5), generator=g, dtype=torch.float64) * 4, dim=1)
        labels = torch.randint(0, 5, (16,), generator=g)
        worst = max(worst, abs(cross_entropy(probs, labels).item() - conditional_kl(probs, labels).item()))
    onehot = torch.eye(5, dtype=torch.float64)
    zero = cross_entropy(onehot, torch.arange(5)).item()
    wrong = cross_entropy(onehot, torch.tensor([1, 0, 3, 4, 2])).item()
    ok = record(5, "cross-entropy / KL identity",
                {"|CE-KL| <= 1e-9": worst <= 1e-9, "one-hot correct = 0": zero == 0.0, "wrong > 0": wrong > 0},
                f"max |CE-KL|={worst:.2e} over 100 batches, one-hot loss={zero}")
    assert ok


# -- 6 -----------------------------------------------------------------------

def test_criterion_06_bounds_oracle():
    mismatches = 0
    checked = 0
    for n in range(1, 6):
        for edges in all_edge_sets(n):
            g = UndirectedGraph(tuple(range(n)), tuple(edges))
            mismatches += maximal_clique_count(g) != maximal_clique_count_bruteforce(n, edges)
            checked += 1
    pairs = list(itertools.combinations(range(6), 2))
    for mask in range(1 << 15):
        edges = [pairs[i] for i in range(15) if mask >> i & 1]
        mismatches += maximal_clique_count(UndirectedGraph(tuple(range(6)), tuple(edges))) != \
            maximal_clique_count_bruteforce(6, edges)
        checked += 1
    rng = random.Random(6)
    for _ in range(10_000):
        edges = [e for e in pairs if rng.random() < 0.5]
        mismatches += maximal_clique_count(UndirectedGraph(tuple(range(6)), tuple(edges))) != \
            maximal_clique_count_bruteforce(6, edges)
        checked += 1
    tri = PartiallyDirectedGraph(("a", "b", "c"), (), (("a", "b"), ("b", "c"), ("a", "c")))
    directed = PartiallyDirectedGraph(("a", "b", "c"), (("a", "b"), ("b", "c")))
    value, k = nonatomic_bound(16)
    ok = record(6, "bounds oracle",
                {"cliques": mismatches == 0, "triangle -> 1": atomic_bound_from_graph(tri) == 1,
                 "directed -> 0": atomic_bound_from_graph(directed) == 0,
                 "nonatomic(16)": abs(value - 2.0) <= 1e-12 and k == 16},
                f"{checked} graphs, {mismatches} mismatches; nonatomic(16)={value!r} at k={k}")
    assert ok


# -- 7 -----------------------------------------------------------------------

def test_criterion_07_merge_validity_oracle():
    checked = bad = 0
    for n in range(1, 5):
        c, b = merge_disagreements(n, all_labeled_dags(n))
        checked, bad = checked + c, bad + b
    # every labeled 5-vertex DAG is a relabeling of an upper-triangular one, and the
    # Pa(Y) sets and partitions enumerated below are closed under relabeling
    c, b = merge_disagreements(5, upper_triangular_dags(5))
    checked, bad = checked + c, bad + b
    ok = record(7, "merge-validity oracle", {"zero disagreements": bad == 0},
                f"{checked} (DAG, Pa(Y), partition) cases, {bad} disagreements")
    assert ok


# -- 8 -----------------------------------------------------------------------

def test_criterion_08_three_scenario(tmp_path_factory):
    res, elapsed, agg_problems = scenario(
        "three-scenario", tmp_path_factory, seeds=SEEDS3, model={"backbones": ["gcn"]},
        dataset={"preset": "reduced", "confounder": {"bias": 0.9}})
    a, b, c = (res.mean(k, "gcn") for k in ("clean", "confounded", "intervened"))
    recovery = (c - b) / (a - b) if a > b else float("nan")
    ok = record(8, "three-scenario (GCN, reduced molecular)",
                {"clean >= 0.90": a >= 0.90, "confounded <= clean - 0.10": b <= a - 0.10,
                 "recovery >= 50%": recovery >= 0.5, "runtime <= 15 min": elapsed <= 900,
                 "aggregates": not agg_problems},
                f"clean={a:.4f} confounded={b:.4f} intervened={c:.4f} recovery={recovery:.2f} "
                f"runtime={elapsed / 60:.1f} min")
    assert ok


# -- 9 -----------------------------------------------------------------------

def test_criterion_09_bias_sweep(tmp_path_factory):
    res, _, agg_problems = scenario(
        "bias-sweep", tmp_path_factory, seeds=SEEDS3, model={"backbones": ["gcn"]},
        dataset={"preset": "reduced"}, params={"biases": [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8]})
    rho = res.summary["gcn.spearman"]
    curve = " ".join(f"{res.mean(f'bias={b:g}', 'gcn'):.3f}" for b in (0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8))
    ok = record(9, "bias sweep (GCN)", {"spearman <= -0.5": rho <= -0.5, "aggregates": not agg_problems},
                f"spearman={rho:.3f}; mean acc by bias 0.1..0.8: {curve}")
    assert ok


# -- 10 ----------------------------------------------------------------------

def test_criterion_10_violation_sweep(tmp_path_factory):
    res, _, agg_problems = scenario(
        "violation-sweep", tmp_path_factory, seeds=SEEDS3, model={"backbones": list(BACKBONES)},
        dataset={"preset": "reduced", "confounder": {"bias": 0.9}},
        params={"ps": [0.0, 0.9, 1.0], "reference": True})
    checks, notes = {"aggregates": not agg_problems}, []
    for bb in BACKBONES:
        p0, p9, p1 = (res.mean(f"p={p:g}", bb) for p in (0.0, 0.9, 1.0))
        iv, cf = res.mean("intervened", bb), res.mean("confounded", bb)
        checks[f"{bb} p=0.9 <= p=0"] = p9 <= p0
        checks[f"{bb} p=0 ~ intervened"] = abs(p0 - iv) <= 0.01
        checks[f"{bb} p=1 ~ confounded"] = abs(p1 - cf) <= 0.01
        notes.append(f"{bb}: p0={p0:.3f} p0.9={p9:.3f} p1={p1:.3f} iv={iv:.3f} conf={cf:.3f}")
    ok = record(10, "violation sweep", checks, "; ".join(notes))
    assert ok


# -- 11 ----------------------------------------------------------------------

def test_criterion_11_pure_causal(tmp_path_factory):
    res, _, agg_problems = scenario(
        "pure-causal", tmp_path_factory, seeds=SEEDS3, model={"backbones": ["gcn"]},
        dataset={"preset": "reduced"}, params={"eval_rate": 0.7})
    clean, shifted = res.mean("clean-test", "gcn"), res.mean("confounded-test", "gcn")
    ok = record(11, "pure-causal OOD (GCN)",
                {"drop >= 10 pts": shifted <= clean - 0.10, "aggregates": not agg_problems},
                f"clean-test={clean:.4f} confounded-test={shifted:.4f} drop={100 * (clean - shifted):.1f} pts, "
                f"confounded share of test={res.summary['confounded_test_share']:.2f}")
    assert ok


# -- 12 ----------------------------------------------------------------------

def test_criterion_12_rec_comparison(tmp_path_factory):
    res, _, agg_problems = scenario(
        "rec-comparison", tmp_path_factory, seeds=[1, 2, 3, 4, 5], model={"backbones": list(BACKBONES)},
        params={"families": ["molecular", "citation"], "bias": 0.7, "molecular_preset": "paper"})
    cells = {(f, bb): res.summary[f"{f}.{bb}.improvement"] for f in ("molecular", "citation") for bb in BACKBONES}
    avg = float(np.mean(list(cells.values())))
    worst = min(cells.values())
    ok = record(12, "REC comparison",
                {"average improvement > 0": avg > 0, "no cell below -1 pt": worst >= -0.01,
                 "aggregates": not agg_problems},
                f"average={100 * avg:+.2f} pts, cells: " +
                ", ".join(f"{f[:3]}/{bb}={100 * g:+.2f}" for (f, bb), g in cells.items()))
    assert ok


# -- 13 ----------------------------------------------------------------------

def test_criterion_13_engine_soundness():
    rng = np.random.default_rng(13)
    perm_err = 0.0
    for bb in BACKBONES:
        model = small_model(bb, rec=True, hidden=8, seed=1)
        s = random_sample(rng, 10, 3, 0)
        base = forward(model, s)
        for _ in range(100):
            perm = rng.permutation(10)
            inv = np.argsort(perm)
            g = AttributedGraph(10, [(int(inv[u]), int(inv[v])) for u, v in s.graph.edges], False,
                                s.graph.node_features[perm])
            perm_err = max(perm_err, (forward(model, GraphSample(g, 0, "train")) - base).abs().max().item())
    fd = 0.0
    for bb in BACKBONES:
        for rec in (False, True):
            fd = max(fd, max(max_fd_error(small_model(bb, rec, seed=5), random_batch(21)[1]).values()))
    norm = 0.0
    for seed in range(50):
        model = small_model(BACKBONES[seed % 3], rec=seed % 2 == 0, seed=seed)
        probs = model(random_batch(seed, graphs=6)[1])
        norm = max(norm, (probs.sum(dim=1) - 1).abs().max().item())
    ok = record(13, "engine soundness",
                {"permutation invariance": perm_err <= 1e-12, "finite differences": fd <= 1e-4,
                 "softmax normalised": norm <= 1e-12},
                f"max perm diff={perm_err:.1e}, max FD rel err={fd:.1e}, max |sum p - 1|={norm:.1e}")
    assert ok
