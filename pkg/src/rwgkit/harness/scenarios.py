"""Experiment scenarios.

Every runner is a pure function of its config: datasets are regenerated from
the configured master seeds and each model is trained with the run seed, so
repeated runs produce identical rows.
"""

from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field, replace
from fractions import Fraction
from pathlib import Path

import numpy as np
from scipy.stats import spearmanr

from ..bounds import (BoundInput, atomic_bound, clique_number_r, nonatomic_bound,
                      parse_edge_list)
from ..causal import apply_intervention, is_confounded, violate_merge
from ..connectors import KINDS
from ..engine import GraphClassifier, evaluate, train
from ..generate import generate_dataset
from ..graph import Dataset, validate_dataset
from ..molecular import GenerationError
from ..specs import ConfounderSpec, Envelope
from .config import DatasetBlock, ExperimentConfig

log = logging.getLogger("rwgkit.harness")


class RunFailure(RuntimeError):
    """A sub-run failed; the message names the condition, the cause is chained."""


@dataclass(frozen=True)
class RunRow:
    family: str
    condition: str
    level: float | None
    backbone: str
    rec: bool
    seed: int
    test_acc: float
    val_acc: float


@dataclass(frozen=True)
class TraceRow:
    family: str
    condition: str
    level: float | None
    backbone: str
    rec: bool
    seed: int
    epoch: int
    train_loss: float
    val_acc: float
    test_acc: float


@dataclass(frozen=True)
class AggregateRow:
    family: str
    condition: str
    level: float | None
    backbone: str
    rec: bool
    n: int
    mean: float
    std: float


@dataclass
class RunResult:
    scenario: str
    rows: list[RunRow] = field(default_factory=list)
    traces: list[TraceRow] = field(default_factory=list)
    summary: dict = field(default_factory=dict)
    conditions: list[str] = field(default_factory=list)
    elapsed: dict = field(default_factory=dict)  # wall-clock seconds per condition; not written to CSV

    def _order(self, r) -> tuple:
        cond = self.conditions.index(r.condition) if r.condition in self.conditions else len(self.conditions)
        return (r.family, cond, r.condition, r.backbone, r.rec)

    def sorted_rows(self) -> list[RunRow]:
        return sorted(self.rows, key=lambda r: self._order(r) + (r.seed,))

    def sorted_traces(self) -> list[TraceRow]:
        return sorted(self.traces, key=lambda r: self._order(r) + (r.seed, r.epoch))

    def aggregates(self) -> list[AggregateRow]:
        groups: dict[tuple, list[RunRow]] = {}
        for r in self.sorted_rows():
            groups.setdefault((r.family, r.condition, r.level, r.backbone, r.rec), []).append(r)
        out = []
        for (fam, cond, level, bb, rec), rows in groups.items():
            m, s = mean_std([r.test_acc for r in rows])
            out.append(AggregateRow(fam, cond, level, bb, rec, len(rows), m, s))
        return out

    def mean(self, condition: str, backbone: str | None = None, rec: bool | None = None,
             family: str | None = None) -> float:
        vals = [r.test_acc for r in self.rows if r.condition == condition
                and (backbone is None or r.backbone == backbone)
                and (rec is None or r.rec == rec) and (family is None or r.family == family)]
        if not vals:
            raise KeyError(f"no rows for condition {condition!r}")
        return float(np.mean(vals))


def mean_std(values) -> tuple[float, float]:
    """Mean and sample standard deviation (ddof = 1; zero for a single value)."""
    a = np.asarray(values, dtype=float)
    return float(a.mean()), float(a.std(ddof=1)) if len(a) > 1 else 0.0


# ---------------------------------------------------------------------------
# shared plumbing
# ---------------------------------------------------------------------------

def _generate(block: DatasetBlock, seed: int, conf: ConfounderSpec | None,
              eval_rate: float | None = None) -> Dataset:
    return generate_dataset(block.recipe(seed, conf, eval_rate))


def _fit(cfg: ExperimentConfig, ds: Dataset, backbone: str, seed: int, rec: bool | None = None,
         test: list | None = None):
    mcfg = cfg.model.model_config(backbone, ds.manifest.feature_dim, ds.manifest.num_classes, rec)
    model = GraphClassifier(mcfg, seed=seed)
    tcfg = replace(cfg.train, seed=seed)
    res = train(model, ds.split("train"), ds.split("val"), ds.split("test") if test is None else test, tcfg)
    return model, res


class _Runner:
    """Collects rows for one scenario and names the failing condition on error."""

    def __init__(self, cfg: ExperimentConfig, scenario: str, conditions: list[str]):
        self.cfg = cfg
        self.result = RunResult(scenario, conditions=list(conditions))

    def run(self, family: str, condition: str, level, backbone: str, seed: int, build,
            rec: bool | None = None, extra_tests: dict | None = None) -> RunRow:
        """``build()`` returns the dataset; ``extra_tests`` maps condition -> test split."""
        t0 = time.perf_counter()
        use_rec = bool(self.cfg.model.rec) if rec is None else rec
        try:
            ds = build()
            model, res = _fit(self.cfg, ds, backbone, seed, rec)
            extra = {c: evaluate(model, split) for c, split in (extra_tests or {}).items()}
        except Exception as exc:
            raise RunFailure(f"{self.result.scenario}: condition {condition!r} ({family}, {backbone}, "
                             f"rec={use_rec}, seed {seed}) failed: {exc}") from exc
        last = res.trace[-1]
        row = RunRow(family, condition, level, backbone, use_rec, seed, last.test_acc, last.val_acc)
        self.result.rows.append(row)
        for c, acc in extra.items():
            self.result.rows.append(replace(row, condition=c, test_acc=acc))
        for e in res.trace:
            self.result.traces.append(TraceRow(family, condition, level, backbone, use_rec, seed, e.epoch,
                                               e.train_loss, e.val_acc, e.test_acc))
        dt = time.perf_counter() - t0
        self.result.elapsed[condition] = self.result.elapsed.get(condition, 0.0) + dt
        log.info("%s %s %s seed=%d rec=%s test_acc=%.4f (%.1fs)", self.result.scenario, condition,
                 backbone, seed, use_rec, row.test_acc, dt)
        return row


def _memo(fn):
    """Build a dataset once and share it across backbones."""
    box = []

    def get():
        if not box:
            box.append(fn())
        return box[0]
    return get


def _conf(cfg: ExperimentConfig, block: DatasetBlock | None = None, **kw) -> ConfounderSpec:
    return (block or cfg.dataset).confounder_spec(**kw)


# ---------------------------------------------------------------------------
# scenarios
# ---------------------------------------------------------------------------

THREE = ["clean", "confounded", "intervened"]


def run_three_scenario(cfg: ExperimentConfig) -> RunResult:
    """(a) no confounder, (b) confounder at the configured bias, (c) confounder plus intervention."""
    block, fam = cfg.dataset, cfg.dataset.family
    conf = _conf(cfg, bias=cfg.params.get("bias", cfg.dataset.confounder.get("bias", 0.9)))
    run = _Runner(cfg, "three-scenario", THREE)
    for seed in cfg.seeds:
        clean = _memo(lambda seed=seed: _generate(block, seed, None))
        confounded = _memo(lambda seed=seed: _generate(block, seed, conf))
        intervened = _memo(lambda c=confounded: apply_intervention(c(), conf))
        for bb in cfg.model.backbones:
            run.run(fam, "clean", None, bb, seed, clean)
            run.run(fam, "confounded", None, bb, seed, confounded)
            run.run(fam, "intervened", None, bb, seed, intervened)
    res = run.result
    for bb in cfg.model.backbones:
        a, b, c = (res.mean(k, bb) for k in THREE)
        res.summary[f"{bb}.gap"] = a - b
        res.summary[f"{bb}.recovery"] = (c - b) / (a - b) if a > b else float("nan")
    return res


def spearman_trend(levels, means) -> float:
    """Spearman rank correlation; a flat curve (undefined correlation) counts as no trend, 0."""
    if len(set(means)) < 2 or len(set(levels)) < 2:
        return 0.0
    rho = spearmanr(levels, means).statistic
    return 0.0 if rho is None or math.isnan(rho) else float(rho)


def run_bias_sweep(cfg: ExperimentConfig) -> RunResult:
    levels = [float(b) for b in cfg.params.get("biases", [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8])]
    conds = [f"bias={b:g}" for b in levels]
    run = _Runner(cfg, "bias-sweep", conds)
    fam = cfg.dataset.family
    for seed in cfg.seeds:
        for b, cond in zip(levels, conds):
            build = _memo(lambda seed=seed, conf=_conf(cfg, bias=b): _generate(cfg.dataset, seed, conf))
            for bb in cfg.model.backbones:
                run.run(fam, cond, b, bb, seed, build)
    res = run.result
    for bb in cfg.model.backbones:
        means = [res.mean(c, bb) for c in conds]
        res.summary[f"{bb}.spearman"] = spearman_trend(levels, means)
    return res


def run_violation_sweep(cfg: ExperimentConfig) -> RunResult:
    """Exempt a fraction p of confounded samples from the intervention (erroneous merges)."""
    ps = [float(p) for p in cfg.params.get("ps", [0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9])]
    reference = bool(cfg.params.get("reference", False))
    conds = [f"p={p:g}" for p in ps] + (["confounded", "intervened"] if reference else [])
    conf = _conf(cfg, bias=cfg.params.get("bias", cfg.dataset.confounder.get("bias", 0.9)))
    run = _Runner(cfg, "violation-sweep", conds)
    fam = cfg.dataset.family
    for seed in cfg.seeds:
        confounded = _memo(lambda seed=seed: _generate(cfg.dataset, seed, conf))
        for p, cond in zip(ps, conds):
            build = _memo(lambda p=p, c=confounded, seed=seed:
                          apply_intervention(c(), conf, violate_merge(c(), conf, p, seed)))
            for bb in cfg.model.backbones:
                run.run(fam, cond, p, bb, seed, build)
        if reference:
            # the three-scenario pipeline, built independently of violate_merge
            ref = _memo(lambda seed=seed: _generate(cfg.dataset, seed, conf))
            ref_iv = _memo(lambda r=ref: apply_intervention(r(), conf))
            for bb in cfg.model.backbones:
                run.run(fam, "confounded", None, bb, seed, ref)
                run.run(fam, "intervened", None, bb, seed, ref_iv)
    res = run.result
    for bb in cfg.model.backbones:
        res.summary[f"{bb}.p_first"] = res.mean(conds[0], bb)
        res.summary[f"{bb}.p_last"] = res.mean(f"p={ps[-1]:g}", bb)
    return res


def confounder_kind_specs(params: dict, bias: float) -> dict:
    """Per-family (condition, ConfounderSpec) pairs compared by ``run_confounder_kinds``."""
    size_a, branch_a = params.get("single_size", 50), params.get("single_branch", 10)
    size_b, branch_b = params.get("multi_size", 5), params.get("multi_branch", 5)
    count_b = params.get("multi_count", 10)
    single = ConfounderSpec((f"connector:{KINDS[0]}:{size_a}:{branch_a}",), bias=bias, decoy=True)
    multi = ConfounderSpec(tuple(f"connector:{KINDS[i]}:{size_b}:{branch_b}" for i in range(count_b)),
                           bias=bias, decoy=True, combine="one")
    if params.get("self_check"):
        multi = single
    node = ConfounderSpec(("feature:uniform",), bias=bias)
    both = ConfounderSpec(("feature:uniform", "rule:triangle_structure"), bias=bias)
    return {"molecular": [("single-large", single), ("multi-small", multi)],
            "citation": [("node-only", node), ("node+edge", both)]}


def run_confounder_kinds(cfg: ExperimentConfig) -> RunResult:
    bias = float(cfg.params.get("bias", 0.7))
    families = list(cfg.params.get("families", ["molecular", "citation"]))
    specs = confounder_kind_specs(cfg.params, bias)
    conds = [c for f in families for c, _ in specs[f]]
    run = _Runner(cfg, "confounder-kinds", conds)
    res = run.result
    for fam in families:
        block = replace(cfg.dataset, family=fam, confounder={})
        for cond, conf in specs[fam]:
            for seed in cfg.seeds:
                ds = _generate(block, seed, conf)
                problems = validate_dataset(ds)
                asm = block.recipe(seed, None).assembly
                env = Envelope(asm.node_range, asm.edge_range)
                problems += [f"sample {s.id} outside the size envelope" for s in ds.samples
                             if not env.contains(s.graph.num_nodes, s.graph.num_edges)]
                if problems:
                    raise GenerationError(f"confounder-kinds: condition {cond!r} seed {seed}: {problems[0]}")
                for bb in cfg.model.backbones:
                    run.run(fam, cond, None, bb, seed, lambda ds=ds: ds)
        a, b = (c for c, _ in specs[fam])
        for bb in cfg.model.backbones:
            res.summary[f"{fam}.{bb}.gap"] = abs(res.mean(a, bb, family=fam) - res.mean(b, bb, family=fam))
    return res


def run_pure_causal(cfg: ExperimentConfig) -> RunResult:
    """Train with no confounding; test on a clean and on a confounded test split."""
    rate = float(cfg.params.get("eval_rate", 0.7))
    conf = _conf(cfg, bias=0.0)
    run = _Runner(cfg, "pure-causal", ["clean-test", "confounded-test"])
    fam = cfg.dataset.family
    shares = []
    for seed in cfg.seeds:
        clean = _generate(cfg.dataset, seed, conf, eval_rate=0.0)
        shifted = _generate(cfg.dataset, seed, conf, eval_rate=rate)
        # training data must not depend on the test-side rate
        assert clean.split("train") == shifted.split("train")
        shares.append(np.mean([is_confounded(s) for s in shifted.split("test")]))
        for bb in cfg.model.backbones:
            run.run(fam, "clean-test", None, bb, seed, lambda d=clean: d,
                    extra_tests={"confounded-test": shifted.split("test")})
    res = run.result
    for bb in cfg.model.backbones:
        res.summary[f"{bb}.drop"] = res.mean("clean-test", bb) - res.mean("confounded-test", bb)
    res.summary["confounded_test_share"] = float(np.mean(shares))
    return res


def run_rec_comparison(cfg: ExperimentConfig) -> RunResult:
    bias = float(cfg.params.get("bias", 0.7))
    families = list(cfg.params.get("families", ["molecular", "citation"]))
    run = _Runner(cfg, "rec-comparison", ["rec-off", "rec-on"])
    for fam in families:
        block = replace(cfg.dataset, family=fam, preset=cfg.params.get(f"{fam}_preset", "paper"),
                        confounder={})
        conf = _conf(cfg, block, bias=bias)
        for seed in cfg.seeds:
            ds = _generate(block, seed, conf)
            for bb in cfg.model.backbones:
                run.run(fam, "rec-off", None, bb, seed, lambda d=ds: d, rec=False)
                run.run(fam, "rec-on", None, bb, seed, lambda d=ds: d, rec=True)
    res = run.result
    gains = []
    for fam in families:
        for bb in cfg.model.backbones:
            g = res.mean("rec-on", bb, family=fam) - res.mean("rec-off", bb, family=fam)
            res.summary[f"{fam}.{bb}.improvement"] = g
            gains.append(g)
        res.summary[f"{fam}.mean_improvement"] = float(np.mean(gains[-len(cfg.model.backbones):]))
    res.summary["mean_improvement"] = float(np.mean(gains))
    res.summary["worst_cell"] = float(min(gains))
    return res


# ---------------------------------------------------------------------------
# bounds report
# ---------------------------------------------------------------------------

CITESEER_NODES = 3312


@dataclass
class BoundsReport:
    rows: list[dict]
    header: str


def _lam(x) -> Fraction:
    return Fraction(str(x))


def run_bounds_report(cfg: ExperimentConfig, dataset: Dataset | None = None) -> BoundsReport:
    """Dataset-scale extrapolations plus per-CPDAG bounds for the configured edge-list files."""
    lam = _lam(cfg.params.get("lambda", 1))
    if dataset is None:
        dataset = _generate(cfg.dataset, cfg.seeds[0], None)
    nodes = sum(s.graph.num_nodes for s in dataset.samples)
    edges = sum(s.graph.num_edges for s in dataset.samples)
    rows = []

    def add(source, union, labels, r, n_nonatomic, lam=lam):
        value, k = nonatomic_bound(n_nonatomic) if n_nonatomic >= 4 else (float("nan"), 0)
        rows.append({"source": source, "union_size": union, "lambda": str(lam), "label_count": labels,
                     "r": r, "atomic": atomic_bound(BoundInput(union, lam, labels), r),
                     "nonatomic": value, "nonatomic_k": k})

    add("dataset:nodes", nodes, len(dataset), 0, nodes)
    add("dataset:nodes+edges", nodes + edges, len(dataset), 0, nodes + edges)
    # reference point at lambda = 1, independent of the configured value
    add("citeseer-scale", CITESEER_NODES, 0, 0, CITESEER_NODES, Fraction(1))
    for path in cfg.params.get("graphs", []):
        g, labels = parse_edge_list(Path(path).read_text(encoding="utf-8"))
        n = len(g.vertices) - len(labels)
        add(f"cpdag:{Path(path).name}", n, len(labels), clique_number_r(g), len(g.vertices))
    header = (f"# bounds report: {len(dataset)} samples, {nodes} nodes, {edges} edges; lambda = {lam}; "
              "one label per graph for dataset-scale rows")
    return BoundsReport(rows, header)


RUNNERS = {
    "three-scenario": run_three_scenario,
    "bias-sweep": run_bias_sweep,
    "violation-sweep": run_violation_sweep,
    "confounder-kinds": run_confounder_kinds,
    "pure-causal": run_pure_causal,
    "rec-comparison": run_rec_comparison,
}
