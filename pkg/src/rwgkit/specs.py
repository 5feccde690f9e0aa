"""Declarative causal / confounder specifications shared by the generators."""

from __future__ import annotations

from dataclasses import dataclass, field


class SpecError(ValueError):
    pass


ELEMENT_KINDS = ("motif", "connector", "feature", "rule")


@dataclass(frozen=True)
class ElementRef:
    """Reference to a registered graph element.

    ``kind`` is one of motif / connector / feature / rule; ``id`` names the
    registry entry.  Connectors carry ``size`` and ``branch``.
    """

    kind: str
    id: str
    size: int = 0
    branch: int = 0

    def __post_init__(self):
        if self.kind not in ELEMENT_KINDS:
            raise SpecError(f"unknown element kind {self.kind!r}")

    @property
    def key(self) -> str:
        if self.kind == "connector":
            return f"connector:{self.id}:{self.size}:{self.branch}"
        return f"{self.kind}:{self.id}"

    def to_json(self) -> dict:
        return {"kind": self.kind, "id": self.id, "size": self.size, "branch": self.branch}

    @classmethod
    def parse(cls, obj) -> "ElementRef":
        if isinstance(obj, ElementRef):
            return obj
        if isinstance(obj, str):
            parts = obj.split(":")
            if parts[0] == "connector":
                return cls("connector", parts[1], int(parts[2]) if len(parts) > 2 else 3,
                           int(parts[3]) if len(parts) > 3 else 0)
            if len(parts) != 2:
                raise SpecError(f"element reference {obj!r} must look like kind:id")
            return cls(parts[0], parts[1])
        return cls(obj["kind"], obj["id"], int(obj.get("size", 0)), int(obj.get("branch", 0)))


@dataclass(frozen=True)
class CausalSpec:
    """Which element determines the label: ``class_map[element_key] -> class``.

    For feature determinants ``statistic`` names the summary recorded per sample.
    """

    determinant: str                      # "motif" | "feature" | "rule"
    elements: tuple[ElementRef, ...]      # element for class 0, 1, ...
    statistic: str = "mean"

    def __post_init__(self):
        object.__setattr__(self, "elements", tuple(ElementRef.parse(e) for e in self.elements))
        if self.determinant not in ("motif", "feature", "rule"):
            raise SpecError(f"unknown determinant {self.determinant!r}")
        keys = [e.key for e in self.elements]
        if len(set(keys)) != len(keys):
            raise SpecError("class_map must be a bijection: duplicate determinant element")
        for e in self.elements:
            if e.kind != self.determinant:
                raise SpecError(f"element {e.key} does not match determinant {self.determinant}")

    @property
    def num_classes(self) -> int:
        return len(self.elements)

    @property
    def class_map(self) -> dict[str, int]:
        return {e.key: c for c, e in enumerate(self.elements)}

    def element_for(self, label: int) -> ElementRef:
        return self.elements[label]

    def to_json(self) -> dict:
        return {"determinant": self.determinant, "statistic": self.statistic,
                "elements": [e.to_json() for e in self.elements]}

    @classmethod
    def from_json(cls, d: dict) -> "CausalSpec":
        return cls(d["determinant"], tuple(ElementRef.parse(e) for e in d["elements"]),
                   d.get("statistic", "mean"))


@dataclass(frozen=True)
class ConfounderSpec:
    """A spurious element correlated with ``biased_class`` in training only.

    ``elements`` is usually a single reference.  With several references,
    ``combine="all"`` attaches every part together as one composite block and
    ``combine="one"`` attaches one part chosen per sample.  ``decoy`` pads
    unconfounded samples with a random carbon block of identical node/edge
    counts so every sample keeps the same size envelope.
    """

    elements: tuple[ElementRef, ...]
    bias: float = 0.7
    biased_class: int = 0
    scope: str = "train"
    decoy: bool = False
    # fixed value / max new edges for feature and rule confounders
    feature_channel: int = -1
    max_edges: int = 6
    combine: str = "all"

    def __post_init__(self):
        els = self.elements
        if isinstance(els, (ElementRef, str, dict)):
            els = (els,)
        object.__setattr__(self, "elements", tuple(ElementRef.parse(e) for e in els))
        if not self.elements:
            raise SpecError("confounder needs at least one element")
        if not 0.0 <= self.bias <= 1.0:
            raise SpecError(f"bias {self.bias} outside [0, 1]")
        if self.combine not in ("all", "one"):
            raise SpecError(f"combine must be 'all' or 'one', got {self.combine!r}")
        if self.scope != "train":
            raise SpecError("only train-scoped confounders are supported")

    @property
    def id(self) -> str:
        return "+".join(e.key for e in self.elements)

    def to_json(self) -> dict:
        return {"elements": [e.to_json() for e in self.elements], "bias": self.bias,
                "biased_class": self.biased_class, "scope": self.scope, "decoy": self.decoy,
                "feature_channel": self.feature_channel, "max_edges": self.max_edges,
                "combine": self.combine}

    @classmethod
    def from_json(cls, d: dict) -> "ConfounderSpec":
        els = d.get("elements", d.get("element"))
        if not isinstance(els, list):
            els = [els]
        return cls(tuple(ElementRef.parse(e) for e in els), float(d.get("bias", 0.7)),
                   int(d.get("biased_class", 0)), d.get("scope", "train"),
                   bool(d.get("decoy", False)), int(d.get("feature_channel", -1)),
                   int(d.get("max_edges", 6)), d.get("combine", "all"))


@dataclass(frozen=True)
class Envelope:
    """Inclusive node / edge count ranges."""

    node_range: tuple[int, int]
    edge_range: tuple[int, int]

    def contains(self, n: int, e: int) -> bool:
        return (self.node_range[0] <= n <= self.node_range[1]
                and self.edge_range[0] <= e <= self.edge_range[1])


@dataclass(frozen=True)
class SizeReserve:
    """Room kept free in a base sample for a confounder attached later.

    ``nodes``/``edges`` bound the largest block that may be attached; with
    decoys every sample gains at least ``floor_nodes``/``floor_edges``.
    """

    nodes: int = 0
    edges: int = 0
    decoy: bool = False
    extra: dict = field(default_factory=dict, hash=False, compare=False)
    floor_nodes: int | None = None
    floor_edges: int | None = None

    @property
    def min_nodes(self) -> int:
        if not self.decoy:
            return 0
        return self.nodes if self.floor_nodes is None else self.floor_nodes

    @property
    def min_edges(self) -> int:
        if not self.decoy:
            return 0
        return self.edges if self.floor_edges is None else self.floor_edges
