"""Node-feature generators for RWG-Citation: 15 distributions and 10 sequences."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import lru_cache
from importlib import resources

import numpy as np

from .graph import rng_from


class FeatureParamError(ValueError):
    pass


@lru_cache(maxsize=None)
def generator_registry() -> dict:
    text = resources.files("rwgkit.resources").joinpath("feature_generators.json").read_text("utf-8")
    doc = json.loads(text)
    return {g["kind"]: g for g in doc["generators"]}


def _winsor_q() -> float:
    text = resources.files("rwgkit.resources").joinpath("feature_generators.json").read_text("utf-8")
    return float(json.loads(text)["winsorize_quantile"])


DISTRIBUTIONS = tuple(k for k, g in generator_registry().items() if g["family"] == "distribution")
SEQUENCES = tuple(k for k, g in generator_registry().items() if g["family"] == "sequence")
WINSOR_Q = _winsor_q()


_POSITIVE = {
    "normal": ("std",), "exponential": ("rate",), "lognormal": ("sigma",),
    "gamma": ("shape", "scale"), "beta": ("alpha", "beta"), "weibull": ("shape", "scale"),
    "laplace": ("scale",), "logistic": ("scale",), "rayleigh": ("scale",),
    "pareto": ("shape", "scale"), "cauchy": ("scale",), "negative_binomial": ("n",),
    "gumbel": ("scale",), "gompertz": ("eta", "b"),
}


@dataclass(frozen=True)
class FeatureGenerator:
    """A named generator plus parameters; missing parameters take registry defaults."""

    kind: str
    params: dict = field(default_factory=dict, hash=False)
    offset_per_node: bool = False

    def __post_init__(self):
        reg = generator_registry()
        if self.kind not in reg:
            raise FeatureParamError(f"unknown feature generator {self.kind!r}")
        merged = dict(reg[self.kind]["params"])
        unknown = set(self.params) - set(merged)
        if unknown:
            raise FeatureParamError(f"{self.kind}: unknown parameters {sorted(unknown)}")
        merged.update(self.params)
        object.__setattr__(self, "params", merged)
        _check_params(self.kind, merged)

    @property
    def family(self) -> str:
        return generator_registry()[self.kind]["family"]

    def to_json(self) -> dict:
        return {"kind": self.kind, "params": self.params, "offset_per_node": self.offset_per_node}


def _check_params(kind: str, p: dict) -> None:
    for name in _POSITIVE.get(kind, ()):
        if not p[name] > 0:
            raise FeatureParamError(f"{kind}: {name} must be > 0, got {p[name]}")
    if kind == "uniform" and not p["low"] < p["high"]:
        raise FeatureParamError("uniform: low must be < high")
    if kind == "negative_binomial" and not 0 < p["p"] <= 1:
        raise FeatureParamError("negative_binomial: p must lie in (0, 1]")
    if kind == "binomial_coefficient" and (int(p["order"]) != p["order"] or p["order"] < 0):
        raise FeatureParamError("binomial_coefficient: order must be a non-negative integer")


def scipy_distribution(gen: FeatureGenerator):
    """Frozen scipy distribution matching ``gen`` (used by the self-consistency tests)."""
    from scipy import stats
    p = gen.params
    k = gen.kind
    table = {
        "normal": lambda: stats.norm(p["mean"], p["std"]),
        "uniform": lambda: stats.uniform(p["low"], p["high"] - p["low"]),
        "exponential": lambda: stats.expon(scale=1 / p["rate"]),
        "lognormal": lambda: stats.lognorm(p["sigma"], scale=math.exp(p["mean"])),
        "gamma": lambda: stats.gamma(p["shape"], scale=p["scale"]),
        "beta": lambda: stats.beta(p["alpha"], p["beta"]),
        "weibull": lambda: stats.weibull_min(p["shape"], scale=p["scale"]),
        "laplace": lambda: stats.laplace(p["loc"], p["scale"]),
        "logistic": lambda: stats.logistic(p["loc"], p["scale"]),
        "rayleigh": lambda: stats.rayleigh(scale=p["scale"]),
        "pareto": lambda: stats.pareto(p["shape"], scale=p["scale"]),
        "cauchy": lambda: stats.cauchy(p["loc"], p["scale"]),
        "negative_binomial": lambda: stats.nbinom(p["n"], p["p"]),
        "gumbel": lambda: stats.gumbel_r(p["loc"], p["scale"]),
        "gompertz": lambda: stats.gompertz(p["eta"], scale=1 / p["b"]),
    }
    return table[k]()


def _draw(kind: str, p: dict, size, rng: np.random.Generator) -> np.ndarray:
    if kind == "normal":
        return rng.normal(p["mean"], p["std"], size)
    if kind == "uniform":
        return rng.uniform(p["low"], p["high"], size)
    if kind == "exponential":
        return rng.exponential(1 / p["rate"], size)
    if kind == "lognormal":
        return rng.lognormal(p["mean"], p["sigma"], size)
    if kind == "gamma":
        return rng.gamma(p["shape"], p["scale"], size)
    if kind == "beta":
        return rng.beta(p["alpha"], p["beta"], size)
    if kind == "weibull":
        return p["scale"] * rng.weibull(p["shape"], size)
    if kind == "laplace":
        return rng.laplace(p["loc"], p["scale"], size)
    if kind == "logistic":
        return rng.logistic(p["loc"], p["scale"], size)
    if kind == "rayleigh":
        return rng.rayleigh(p["scale"], size)
    if kind == "pareto":
        # classical Pareto with minimum ``scale``; numpy draws the Lomax form
        x = p["scale"] * (1 + rng.pareto(p["shape"], size))
        hi = p["scale"] * (1 - WINSOR_Q) ** (-1 / p["shape"])
        return np.minimum(x, hi)
    if kind == "cauchy":
        x = p["loc"] + p["scale"] * rng.standard_cauchy(size)
        q = p["scale"] * math.tan(math.pi * (WINSOR_Q - 0.5))
        return np.clip(x, p["loc"] - q, p["loc"] + q)
    if kind == "negative_binomial":
        return rng.negative_binomial(p["n"], p["p"], size).astype(np.float64)
    if kind == "gumbel":
        return rng.gumbel(p["loc"], p["scale"], size)
    if kind == "gompertz":
        # inverse CDF of F(x) = 1 - exp(-eta (e^{b x} - 1))
        u = rng.random(size)
        return np.log1p(-np.log1p(-u) / p["eta"]) / p["b"]
    raise FeatureParamError(kind)


def _primes(count: int) -> list[int]:
    out, c = [], 2
    while len(out) < count:
        if all(c % q for q in out if q * q <= c):
            out.append(c)
        c += 1
    return out


def sequence_terms(gen: FeatureGenerator, start: int, count: int) -> np.ndarray:
    """Terms ``start .. start + count - 1`` (0-based) of a sequence generator."""
    p, k = gen.params, gen.kind
    idx = np.arange(start, start + count, dtype=np.float64)
    if k == "arithmetic":
        return p["start"] + p["step"] * idx
    if k == "geometric":
        return p["start"] * np.power(float(p["ratio"]), idx)
    if k == "fibonacci":
        a, b = float(p["first"]), float(p["second"])
        seq = []
        for _ in range(start + count):
            seq.append(a)
            a, b = b, a + b
        return np.array(seq[start:], dtype=np.float64)
    if k == "square":
        return (idx + 1) ** 2
    if k == "cube":
        return (idx + 1) ** 3
    if k == "prime":
        return np.array(_primes(start + count)[start:], dtype=np.float64)
    if k == "triangular":
        return (idx + 1) * (idx + 2) / 2
    if k == "rectangular":
        return (idx + 1) * (idx + 2)
    if k == "binomial_coefficient":
        n = int(p["order"])
        return np.array([math.comb(n, int(i)) for i in idx], dtype=np.float64)
    if k == "hamiltonian":
        h = np.cumsum(1.0 / np.arange(1, start + count + 1))
        return h[start:]
    raise FeatureParamError(k)


def generate_features(gen: FeatureGenerator, n: int, dim: int, seed: int = 0) -> np.ndarray:
    """``n x dim`` feature block from one generator.

    Distributions draw i.i.d. entries from the seeded stream.  Sequences are
    pure: every row holds the first ``dim`` terms, shifted by the row index
    when ``offset_per_node`` is set.
    """
    if n < 1 or dim < 1:
        raise FeatureParamError(f"need n, dim >= 1, got {n}, {dim}")
    if gen.family == "distribution":
        return _draw(gen.kind, gen.params, (n, dim), rng_from(seed))
    rows = [sequence_terms(gen, i if gen.offset_per_node else 0, dim) for i in range(n)]
    return np.vstack(rows)


def signed_log1p(x: np.ndarray) -> np.ndarray:
    return np.sign(x) * np.log1p(np.abs(x))
