"""Experiment configuration: a YAML document mirroring ``ExperimentConfig``."""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from pathlib import Path

import yaml

from ..citation import CitationAssemblyConfig
from ..engine import BACKBONES, ModelConfig, TrainConfig
from ..generate import (DEFAULT_CITATION_CONFOUNDER, DEFAULT_MOLECULAR_CONFOUNDER, PAPER_SPLITS,
                        DatasetRecipe, default_recipe)
from ..molecular import MoleculeAssemblyConfig
from ..rec import RecConfig
from ..specs import CausalSpec, ConfounderSpec, SpecError

SCENARIOS = ("three-scenario", "bias-sweep", "violation-sweep", "confounder-kinds", "pure-causal",
             "rec-comparison", "bounds")


class ConfigError(ValueError):
    pass


# Reduced-difficulty molecular family: two classes told apart by two distinct
# motifs, carbon-only fillers and graphs of 20-30 nodes.
REDUCED_MOLECULAR = MoleculeAssemblyConfig(
    motif_pool=("benzene_ring", "ethane", "methane"), node_range=(20, 30), edge_range=(19, 45),
    num_classes=2)
REDUCED_CAUSAL = CausalSpec("motif", ("motif:pyrrole", "motif:ethanol"))
REDUCED_CONFOUNDER = ("motif:imidazole",)


@dataclass(frozen=True)
class DatasetBlock:
    family: str = "molecular"
    preset: str = "reduced"  # reduced | paper
    split_counts: dict = field(default_factory=lambda: dict(PAPER_SPLITS), hash=False)
    confounder: dict = field(default_factory=dict, hash=False)
    assembly: dict = field(default_factory=dict, hash=False)
    causal: dict | None = field(default=None, hash=False)

    def __post_init__(self):
        if self.family not in ("molecular", "citation"):
            raise ConfigError(f"dataset.family must be molecular or citation, got {self.family!r}")
        if self.preset not in ("reduced", "paper"):
            raise ConfigError(f"dataset.preset must be reduced or paper, got {self.preset!r}")

    def confounder_spec(self, **overrides) -> ConfounderSpec:
        d = dict(self.confounder)
        d.update(overrides)
        if "elements" not in d:
            d["elements"] = list(self._default_confounder())
        try:
            return ConfounderSpec.from_json(d)
        except SpecError as exc:
            raise ConfigError(f"dataset.confounder: {exc}") from exc

    def _default_confounder(self) -> tuple:
        if self.family == "citation":
            return DEFAULT_CITATION_CONFOUNDER
        return REDUCED_CONFOUNDER if self.preset == "reduced" else DEFAULT_MOLECULAR_CONFOUNDER

    def recipe(self, seed: int, confounder: ConfounderSpec | None, eval_rate: float | None = None,
               split_counts: dict | None = None) -> DatasetRecipe:
        counts = dict(split_counts or self.split_counts)
        base = default_recipe(self.family, seed, None, counts)
        asm, causal = base.assembly, base.causal
        if self.family == "molecular" and self.preset == "reduced":
            asm, causal = REDUCED_MOLECULAR, REDUCED_CAUSAL
        if self.assembly:
            cls = MoleculeAssemblyConfig if self.family == "molecular" else CitationAssemblyConfig
            asm = cls.from_json(dict(asm.to_json(), **self.assembly))
        if self.causal is not None:
            causal = CausalSpec.from_json(self.causal)
        try:
            return DatasetRecipe(self.family, asm, causal, counts, seed, confounder, eval_rate)
        except SpecError as exc:
            raise ConfigError(str(exc)) from exc

    def to_json(self) -> dict:
        return {"family": self.family, "preset": self.preset, "split_counts": dict(self.split_counts),
                "confounder": dict(self.confounder), "assembly": dict(self.assembly),
                "causal": self.causal}


@dataclass(frozen=True)
class ModelBlock:
    backbones: tuple = ("gcn",)
    hidden_dim: int = 64
    num_layers: int = 2
    cheb_k: int = 2
    rec: RecConfig | None = None

    def __post_init__(self):
        for b in self.backbones:
            if b not in BACKBONES:
                raise ConfigError(f"unknown backbone {b!r}; choose from {BACKBONES}")
        if not self.backbones:
            raise ConfigError("model.backbones must not be empty")

    def model_config(self, backbone: str, in_dim: int, num_classes: int, rec: bool | None = None) -> ModelConfig:
        use = self.rec if rec is None else (self.rec or RecConfig()) if rec else None
        return ModelConfig(backbone, in_dim, num_classes, self.hidden_dim, self.num_layers, self.cheb_k, use)


@dataclass(frozen=True)
class ExperimentConfig:
    scenario: str
    seeds: tuple = (1, 2, 3, 4, 5)
    output_dir: str = "results"
    dataset: DatasetBlock = DatasetBlock()
    model: ModelBlock = ModelBlock()
    train: TrainConfig = TrainConfig()
    params: dict = field(default_factory=dict, hash=False)

    def __post_init__(self):
        if self.scenario not in SCENARIOS:
            raise ConfigError(f"unknown scenario {self.scenario!r}; choose from {SCENARIOS}")
        if not self.seeds:
            raise ConfigError("seeds must be a non-empty list")
        if len(set(self.seeds)) != len(self.seeds):
            raise ConfigError("seeds must be distinct")

    def with_params(self, **kw) -> "ExperimentConfig":
        return replace(self, params=dict(self.params, **kw))

    def to_json(self) -> dict:
        return {
            "scenario": self.scenario, "seeds": list(self.seeds), "output_dir": self.output_dir,
            "dataset": self.dataset.to_json(),
            "model": {"backbones": list(self.model.backbones), "hidden_dim": self.model.hidden_dim,
                      "num_layers": self.model.num_layers, "cheb_k": self.model.cheb_k,
                      "rec": None if self.model.rec is None else self.model.rec.to_json()},
            "train": self.train.to_json(), "params": dict(self.params),
        }


def _block(doc: dict, key: str) -> dict:
    val = doc.get(key) or {}
    if not isinstance(val, dict):
        raise ConfigError(f"{key} must be a mapping")
    return val


def config_from_dict(doc: dict) -> ExperimentConfig:
    if not isinstance(doc, dict):
        raise ConfigError("experiment config must be a mapping")
    known = {"scenario", "seeds", "output_dir", "dataset", "model", "train", "params"}
    unknown = set(doc) - known
    if unknown:
        raise ConfigError(f"unknown top-level keys {sorted(unknown)}")
    if "scenario" not in doc:
        raise ConfigError("missing required key 'scenario'")
    try:
        ds = _block(doc, "dataset")
        dataset = DatasetBlock(**{k: v for k, v in ds.items()})
        m = dict(_block(doc, "model"))
        rec = m.pop("rec", None)
        if isinstance(rec, bool):
            rec = RecConfig() if rec else None
        elif isinstance(rec, dict):
            rec = RecConfig(**rec) if rec.get("enabled", True) else None
        if "backbones" in m:
            m["backbones"] = tuple(m["backbones"])
        model = ModelBlock(rec=rec, **m)
        train = TrainConfig(**_block(doc, "train"))
        seeds = tuple(int(s) for s in doc.get("seeds", (1, 2, 3, 4, 5)))
        return ExperimentConfig(doc["scenario"], seeds, str(doc.get("output_dir", "results")),
                                dataset, model, train, dict(_block(doc, "params")))
    except TypeError as exc:
        raise ConfigError(f"bad config field: {exc}") from exc
    except (ValueError, SpecError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(str(exc)) from exc


def load_config(path) -> ExperimentConfig:
    try:
        doc = yaml.safe_load(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: invalid YAML: {exc}") from exc
    return config_from_dict(doc)


# Scenario defaults used when the CLI runs without --config.
DEFAULTS = {
    "three-scenario": {"seeds": [1, 2, 3], "dataset": {"confounder": {"bias": 0.9}}},
    "bias-sweep": {"seeds": [1, 2, 3],
                   "params": {"biases": [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8]}},
    "violation-sweep": {"seeds": [1, 2, 3], "model": {"backbones": ["gcn", "gin", "cheb"]},
                        "dataset": {"confounder": {"bias": 0.9}},
                        "params": {"ps": [0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0]}},
    "confounder-kinds": {"seeds": [1, 2, 3], "dataset": {"preset": "paper"}},
    "pure-causal": {"seeds": [1, 2, 3], "params": {"eval_rate": 0.7}},
    "rec-comparison": {"seeds": [1, 2, 3, 4, 5], "model": {"backbones": ["gcn", "gin", "cheb"]},
                       "params": {"families": ["molecular", "citation"], "bias": 0.7}},
    "bounds": {"seeds": [1], "dataset": {"split_counts": {"train": 100, "val": 0, "test": 0}},
               "params": {"lambda": 1, "graphs": []}},
}


def default_config(scenario: str, **overrides) -> ExperimentConfig:
    if scenario not in DEFAULTS:
        raise ConfigError(f"unknown scenario {scenario!r}; choose from {SCENARIOS}")
    doc = {"scenario": scenario, "output_dir": f"results/{scenario}"}
    doc.update(DEFAULTS[scenario])
    doc.update(overrides)
    return config_from_dict(doc)
