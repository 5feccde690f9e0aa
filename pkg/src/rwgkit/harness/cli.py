"""Command-line entry point: ``rwgkit <command> ...``.

Exit codes: 0 success, 2 configuration error, 3 generation or data error,
4 numerical error.
"""

from __future__ import annotations

import argparse
import logging
import sys
import time
from dataclasses import replace
from fractions import Fraction
from pathlib import Path

from ..bounds import (BoundError, BoundInput, atomic_bound, clique_number_r, nonatomic_bound,
                      parse_edge_list)
from ..causal import InterventionError
from ..connectors import ConnectorParamError
from ..engine import (BACKBONES, EvaluationError, GraphClassifier, ModelConfig, NumericalError,
                      ShapeError, TrainConfig, save_checkpoint, train)
from ..features import FeatureParamError
from ..generate import generate_dataset
from ..graph import GraphError, validate_dataset
from ..io import DatasetFormatError, read_dataset, write_dataset
from ..molecular import GenerationError, MotifLookupError
from ..rec import RecConfig
from ..rules import RuleParamError, RuleSchemaError
from ..specs import Envelope, SpecError
from .config import SCENARIOS, ConfigError, DatasetBlock, default_config, load_config
from .plotting import render_figures
from .report import write_bounds, write_result
from .scenarios import RUNNERS, RunFailure, run_bounds_report

log = logging.getLogger("rwgkit.harness")

EXIT_OK, EXIT_CONFIG, EXIT_GENERATION, EXIT_NUMERICAL = 0, 2, 3, 4

CONFIG_ERRORS = (ConfigError, SpecError, BoundError, ConnectorParamError, FeatureParamError,
                 RuleParamError, FileNotFoundError)
GENERATION_ERRORS = (GenerationError, MotifLookupError, RuleSchemaError, GraphError, DatasetFormatError,
                     InterventionError)
NUMERICAL_ERRORS = (NumericalError, ShapeError, EvaluationError, ArithmeticError)


def exit_code_for(exc: BaseException) -> int | None:
    root = exc.__cause__ if isinstance(exc, RunFailure) and exc.__cause__ is not None else exc
    for codes, code in ((CONFIG_ERRORS, EXIT_CONFIG), (GENERATION_ERRORS, EXIT_GENERATION),
                        (NUMERICAL_ERRORS, EXIT_NUMERICAL)):
        if isinstance(root, codes):
            return code
    return None


def _split_counts(args) -> dict | None:
    if args.train is None and args.val is None and args.test is None:
        return None
    return {"train": args.train or 0, "val": args.val or 0, "test": args.test or 0}


def cmd_gen(args) -> int:
    block = DatasetBlock(args.family, args.preset)
    if args.train is not None or args.val is not None or args.test is not None:
        block = replace(block, split_counts=_split_counts(args))
    conf = None if args.no_confounder else block.confounder_spec(bias=args.bias)
    t0 = time.perf_counter()
    ds = generate_dataset(block.recipe(args.seed, conf, args.eval_rate))
    write_dataset(ds, args.out)
    print(f"wrote {len(ds)} samples to {args.out} (digest {ds.manifest.config_digest[:12]}, "
          f"{time.perf_counter() - t0:.1f}s)")
    return EXIT_OK


def cmd_train(args) -> int:
    ds = read_dataset(args.data)
    rec = RecConfig() if args.rec else None
    cfg = ModelConfig(args.model, ds.manifest.feature_dim, ds.manifest.num_classes,
                      hidden_dim=args.hidden, num_layers=args.layers, rec=rec)
    model = GraphClassifier(cfg, seed=args.seed)
    tcfg = TrainConfig(learning_rate=args.lr, epochs=args.epochs, batch_size=args.batch_size,
                       optimizer=args.optimizer, seed=args.seed)
    res = train(model, ds.split("train"), ds.split("val"), ds.split("test"), tcfg)
    last = res.trace[-1]
    print(f"{args.model}{' +REC' if args.rec else ''} seed={args.seed}: train_loss={last.train_loss:.4f} "
          f"val_acc={last.val_acc:.4f} test_acc={last.test_acc:.4f}")
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        lines = ["epoch,train_loss,val_acc,test_acc"]
        lines += [f"{e.epoch},{e.train_loss!r},{e.val_acc!r},{e.test_acc!r}" for e in res.trace]
        (out / "trace.csv").write_text("\n".join(lines) + "\n", encoding="utf-8")
        save_checkpoint(model, out / "checkpoint.txt")
    return EXIT_OK


def cmd_experiment(args) -> int:
    if args.config:
        cfg = load_config(args.config)
        if cfg.scenario != args.name:
            raise ConfigError(f"config is for scenario {cfg.scenario!r}, not {args.name!r}")
    else:
        cfg = default_config(args.name)
    if args.seeds:
        cfg = replace(cfg, seeds=tuple(args.seeds))
    out = Path(args.out or cfg.output_dir)
    if cfg.scenario == "bounds":
        data = cfg.params.get("data")
        report = run_bounds_report(cfg, read_dataset(data) if data else None)
        path = write_bounds(report, out)
        print(path.read_text(encoding="utf-8"), end="")
        return EXIT_OK
    res = RUNNERS[cfg.scenario](cfg)
    write_result(res, out, cfg.to_json())
    figures = render_figures(cfg.scenario, out)
    print((out / "report.txt").read_text(encoding="utf-8"), end="")
    for name, secs in res.elapsed.items():
        print(f"# {name}: {secs:.1f}s")
    print(f"# wrote CSVs and {len(figures)} figures to {out}")
    return EXIT_OK


def cmd_bounds(args) -> int:
    try:
        text = Path(args.graph).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read {args.graph}: {exc}") from exc
    g, labels = parse_edge_list(text)
    k = len(labels) if args.labels is None else args.labels
    n = len(g.vertices)
    if k > n:
        raise BoundError(f"{k} labels but only {n} vertices")
    try:
        lam = Fraction(args.lam)
    except ValueError as exc:
        raise ConfigError(f"--lambda: {exc}") from exc
    r = clique_number_r(g)
    atomic = atomic_bound(BoundInput(n - k, lam, k), r)
    print(f"vertices={n} labels={k} lambda={lam} r={r}")
    print(f"atomic_bound={atomic}")
    if n >= 4:
        value, kk = nonatomic_bound(n)
        print(f"nonatomic_bound={value:.6f} (k={kk})")
    else:
        print("nonatomic_bound=undefined (needs n >= 4)")
    return EXIT_OK


def cmd_validate(args) -> int:
    ds = read_dataset(args.data)
    problems = validate_dataset(ds)
    asm = ds.manifest.config.get("assembly", {})
    if "node_range" in asm and "edge_range" in asm:
        env = Envelope(tuple(asm["node_range"]), tuple(asm["edge_range"]))
        problems += [f"sample {s.id}: {s.graph.num_nodes} nodes / {s.graph.num_edges} edges outside "
                     f"the size envelope" for s in ds.samples
                     if not env.contains(s.graph.num_nodes, s.graph.num_edges)]
    for p in problems[:20]:
        print(p)
    if problems:
        print(f"{len(problems)} problem(s) in {len(ds)} samples")
        return EXIT_GENERATION
    print(f"ok: {len(ds)} samples, splits {ds.manifest.split_counts}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="rwgkit", description="Synthetic causal graph benchmarks and REC training.")
    p.add_argument("-v", "--verbose", action="store_true", help="log each training run")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", help="generate a dataset")
    g.add_argument("family", choices=["molecular", "citation"])
    g.add_argument("--bias", type=float, default=0.7)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", required=True)
    g.add_argument("--preset", choices=["paper", "reduced"], default="paper")
    g.add_argument("--no-confounder", action="store_true")
    g.add_argument("--eval-rate", type=float, default=None, help="confounding rate for val/test")
    for split in ("train", "val", "test"):
        g.add_argument(f"--{split}", type=int, default=None, help=f"{split} split size")
    g.set_defaults(func=cmd_gen)

    t = sub.add_parser("train", help="train one model on a generated dataset")
    t.add_argument("--data", required=True)
    t.add_argument("--model", choices=BACKBONES, default="gcn")
    t.add_argument("--rec", action="store_true")
    t.add_argument("--seed", type=int, default=0)
    t.add_argument("--epochs", type=int, default=50)
    t.add_argument("--lr", type=float, default=0.01)
    t.add_argument("--batch-size", type=int, default=32)
    t.add_argument("--hidden", type=int, default=64)
    t.add_argument("--layers", type=int, default=2)
    t.add_argument("--optimizer", choices=["adam", "sgd"], default="adam")
    t.add_argument("--out", default=None, help="write trace.csv and checkpoint.txt here")
    t.set_defaults(func=cmd_train)

    e = sub.add_parser("experiment", help="run a scenario and write CSVs plus figures")
    e.add_argument("name", choices=SCENARIOS)
    e.add_argument("--config", default=None)
    e.add_argument("--out", default=None)
    e.add_argument("--seeds", type=int, nargs="+", default=None)
    e.set_defaults(func=cmd_experiment)

    b = sub.add_parser("bounds", help="intervention lower bounds for an edge-list CPDAG")
    b.add_argument("--graph", required=True)
    b.add_argument("--labels", type=int, default=None)
    b.add_argument("--lambda", dest="lam", default="1")
    b.set_defaults(func=cmd_bounds)

    v = sub.add_parser("validate", help="audit a dataset directory")
    v.add_argument("--data", required=True)
    v.set_defaults(func=cmd_validate)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(asctime)s %(message)s")
    try:
        return args.func(args)
    except Exception as exc:
        code = exit_code_for(exc)
        if code is None:
            raise
        print(f"error: {exc}", file=sys.stderr)
        return code


if __name__ == "__main__":
    sys.exit(main())
