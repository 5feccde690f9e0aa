"""Whole-dataset generation for both RWG families."""

from __future__ import annotations

from dataclasses import dataclass, field

from .causal import check_disjoint, confounder_reserve, inject_confounder
from .citation import DEFAULT_CAUSAL, CitationAssemblyConfig, assemble_citation_graph
from .graph import SPLITS, Dataset, Manifest, SeedStream, config_digest, validate_graph
from .molecular import MoleculeAssemblyConfig, assemble_molecule
from .specs import CausalSpec, ConfounderSpec, SpecError

PAPER_SPLITS = {"train": 1500, "val": 200, "test": 200}
DEFAULT_MOLECULAR_CAUSAL = ("motif:benzene_ring", "motif:pyridine", "motif:imidazole",
                            "motif:thiazole", "motif:nitrobenzene")
DEFAULT_MOLECULAR_CONFOUNDER = ("motif:hydrated_sulfuric_acid",)
DEFAULT_CITATION_CONFOUNDER = ("feature:uniform",)


@dataclass(frozen=True)
class DatasetRecipe:
    """Everything needed to regenerate a dataset bit-for-bit."""

    family: str
    assembly: MoleculeAssemblyConfig | CitationAssemblyConfig
    causal: CausalSpec
    split_counts: dict = field(default_factory=lambda: dict(PAPER_SPLITS), hash=False)
    master_seed: int = 0
    confounder: ConfounderSpec | None = None
    eval_rate: float | None = None

    def __post_init__(self):
        if self.family not in ("molecular", "citation"):
            raise SpecError(f"unknown family {self.family!r}")
        if self.causal.num_classes != self.assembly.num_classes:
            raise SpecError(f"causal spec has {self.causal.num_classes} classes, "
                            f"assembly config {self.assembly.num_classes}")
        if self.confounder is not None:
            check_disjoint(self.causal, self.confounder)
            if not 0 <= self.confounder.biased_class < self.causal.num_classes:
                raise SpecError("biased_class outside the label range")

    def to_json(self) -> dict:
        return {
            "family": self.family,
            "assembly": self.assembly.to_json(),
            "causal": self.causal.to_json(),
            "split_counts": {s: int(self.split_counts.get(s, 0)) for s in SPLITS},
            "master_seed": self.master_seed,
            "confounder": None if self.confounder is None else self.confounder.to_json(),
            "eval_rate": self.eval_rate,
        }

    @classmethod
    def from_json(cls, d: dict) -> "DatasetRecipe":
        asm = (MoleculeAssemblyConfig if d["family"] == "molecular" else CitationAssemblyConfig)
        conf = d.get("confounder")
        return cls(d["family"], asm.from_json(d["assembly"]), CausalSpec.from_json(d["causal"]),
                   dict(d["split_counts"]), int(d["master_seed"]),
                   None if conf is None else ConfounderSpec.from_json(conf), d.get("eval_rate"))


def default_recipe(family: str, seed: int = 0, bias: float | None = 0.7,
                   split_counts: dict | None = None) -> DatasetRecipe:
    """Paper-default sizes with the family's default causal and confounder elements."""
    counts = dict(split_counts or PAPER_SPLITS)
    if family == "molecular":
        asm, causal = MoleculeAssemblyConfig(), CausalSpec("motif", DEFAULT_MOLECULAR_CAUSAL)
        conf_els = DEFAULT_MOLECULAR_CONFOUNDER
    elif family == "citation":
        asm, causal = CitationAssemblyConfig(), CausalSpec("feature", DEFAULT_CAUSAL)
        conf_els = DEFAULT_CITATION_CONFOUNDER
    else:
        raise SpecError(f"unknown family {family!r}")
    conf = None if bias is None else ConfounderSpec(conf_els, bias=bias)
    return DatasetRecipe(family, asm, causal, counts, seed, conf)


def generate_dataset(recipe: DatasetRecipe) -> Dataset:
    """Generate base samples (label = index mod C within each split), then inject the confounder."""
    stream = SeedStream(recipe.master_seed)
    reserve = confounder_reserve(recipe.confounder, recipe.family)
    assemble = assemble_molecule if recipe.family == "molecular" else assemble_citation_graph
    samples = []
    sid = 0
    for split in SPLITS:
        for i in range(int(recipe.split_counts.get(split, 0))):
            s = assemble(recipe.assembly, recipe.causal, stream.derive(sid, recipe.family),
                         label=i % recipe.causal.num_classes, reserve=reserve, split=split,
                         sample_id=sid)
            validate_graph(s.graph)
            samples.append(s)
            sid += 1
    cfg = recipe.to_json()
    manifest = Manifest(recipe.causal.num_classes, recipe.assembly.feature_dim,
                        {s: int(recipe.split_counts.get(s, 0)) for s in SPLITS},
                        recipe.master_seed, config_digest(cfg), family=recipe.family, config=cfg)
    ds = Dataset(tuple(samples), manifest)
    if recipe.confounder is not None:
        ds = inject_confounder(ds, recipe.confounder, stream.derive(0, "confounder"),
                               recipe.causal, recipe.eval_rate)
        # the digest always covers the complete recipe, confounder included
        ds = ds.with_samples(ds.samples, config=cfg, config_digest=config_digest(cfg))
    return ds
