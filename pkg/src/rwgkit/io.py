"""On-disk dataset format: ``manifest.json`` plus line-delimited ``samples.jsonl``.

Floating-point features are written with 17 significant digits so a
read/write round trip reproduces every float64 bit-exactly.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .graph import (AttributedGraph, Dataset, GraphSample, Manifest, Provenance,
                    SPLITS)

MANIFEST_NAME = "manifest.json"
SAMPLES_NAME = "samples.jsonl"


class DatasetFormatError(ValueError):
    """Malformed record in a dataset file."""


class IntegrityError(DatasetFormatError):
    """Manifest and sample file disagree."""


def _num(x: float) -> str:
    return format(float(x), ".17g")


def encode_sample(s: GraphSample) -> str:
    g = s.graph
    head = {
        "id": s.id,
        "split": s.split,
        "label": s.label,
        "num_nodes": g.num_nodes,
        "directed": g.directed,
        "edges": [list(e) for e in g.edges],
        "feature_dim": g.feature_dim,
        "node_tags": None if g.node_tags is None else list(g.node_tags),
        "provenance": s.provenance.to_json(),
    }
    body = json.dumps(head, sort_keys=True, separators=(",", ":"))
    feats = ",".join(_num(v) for v in g.node_features.ravel())
    return body[:-1] + ',"features":[' + feats + "]}"


def decode_sample(line: str, lineno: int = 0) -> GraphSample:
    try:
        rec = json.loads(line)
        n = int(rec["num_nodes"])
        dim = int(rec["feature_dim"])
        feats = np.asarray(rec["features"], dtype=np.float64)
        if feats.size != n * dim:
            raise DatasetFormatError(f"line {lineno}: {feats.size} feature values for {n}x{dim}")
        graph = AttributedGraph(n, [tuple(e) for e in rec["edges"]], bool(rec["directed"]),
                                feats.reshape(n, dim), rec.get("node_tags"))
        return GraphSample(graph, int(rec["label"]), rec["split"],
                           Provenance.from_json(rec["provenance"]), int(rec["id"]))
    except DatasetFormatError:
        raise
    except (ValueError, KeyError, TypeError) as exc:
        raise DatasetFormatError(f"line {lineno}: malformed record ({exc})") from exc


def write_dataset(ds: Dataset, path) -> None:
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    manifest = json.dumps(ds.manifest.to_json(), sort_keys=True, indent=2)
    (path / MANIFEST_NAME).write_text(manifest + "\n", encoding="utf-8")
    with open(path / SAMPLES_NAME, "w", encoding="utf-8", newline="\n") as fh:
        for s in ds.samples:
            fh.write(encode_sample(s))
            fh.write("\n")


def read_dataset(path) -> Dataset:
    path = Path(path)
    try:
        manifest = Manifest.from_json(json.loads((path / MANIFEST_NAME).read_text(encoding="utf-8")))
    except (ValueError, KeyError) as exc:
        raise DatasetFormatError(f"{MANIFEST_NAME}: {exc}") from exc
    samples = []
    text = (path / SAMPLES_NAME).read_text(encoding="utf-8")
    if text and not text.endswith("\n"):
        # a record file always ends with a newline; anything else is truncated
        last = text.count("\n") + 1
        raise DatasetFormatError(f"line {last}: truncated record (missing newline)")
    for lineno, line in enumerate(text.splitlines(), start=1):
        if line.strip():
            samples.append(decode_sample(line, lineno))
    counts = {s: 0 for s in SPLITS}
    for s in samples:
        counts[s.split] += 1
    expected = {s: manifest.split_counts.get(s, 0) for s in SPLITS}
    if counts != expected:
        raise IntegrityError(f"manifest split counts {expected} != records {counts}")
    return Dataset(tuple(samples), manifest)
