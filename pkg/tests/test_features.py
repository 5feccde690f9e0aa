import math

import numpy as np
import pytest
from scipy import stats

from rwgkit.features import (DISTRIBUTIONS, SEQUENCES, FeatureGenerator, FeatureParamError,
                             generate_features, scipy_distribution, sequence_terms, signed_log1p)

ALPHA = 1e-3


def test_registry_sizes():
    assert len(DISTRIBUTIONS) == 15
    assert len(SEQUENCES) == 10


@pytest.mark.parametrize("kind", [k for k in DISTRIBUTIONS if k != "negative_binomial"])
def test_distribution_ks(kind):
    gen = FeatureGenerator(kind)
    x = generate_features(gen, 10_000, 1, seed=11).ravel()
    assert stats.kstest(x, scipy_distribution(gen).cdf).pvalue > ALPHA


def test_negative_binomial_chi_square():
    gen = FeatureGenerator("negative_binomial")
    x = generate_features(gen, 10_000, 1, seed=5).ravel().astype(int)
    dist = scipy_distribution(gen)
    top = int(dist.ppf(0.995))
    observed = np.array([np.sum(x == k) for k in range(top)] + [np.sum(x >= top)])
    probs = np.array([dist.pmf(k) for k in range(top)] + [dist.sf(top - 1)])
    assert stats.chisquare(observed, probs * len(x)).pvalue > ALPHA


def test_distributions_are_seed_deterministic():
    gen = FeatureGenerator("gamma")
    a = generate_features(gen, 5, 3, seed=1)
    assert np.array_equal(a, generate_features(gen, 5, 3, seed=1))
    assert not np.array_equal(a, generate_features(gen, 5, 3, seed=2))


@pytest.mark.parametrize("kind, params, expected", [
    ("arithmetic", {"start": 1, "step": 2}, [1, 3, 5, 7, 9]),
    ("geometric", {"start": 1, "ratio": 2}, [1, 2, 4, 8, 16]),
    ("fibonacci", {"first": 1, "second": 1}, [1, 1, 2, 3, 5]),
    ("square", {}, [1, 4, 9, 16, 25]),
    ("cube", {}, [1, 8, 27, 64, 125]),
    ("prime", {}, [2, 3, 5, 7, 11]),
    ("triangular", {}, [1, 3, 6, 10, 15]),
    ("rectangular", {}, [2, 6, 12, 20, 30]),
    ("binomial_coefficient", {"order": 4}, [1, 4, 6, 4, 1]),
])
def test_sequence_terms(kind, params, expected):
    gen = FeatureGenerator(kind, params)
    assert sequence_terms(gen, 0, 5).tolist() == expected


def test_hamiltonian_partial_sums():
    h = sequence_terms(FeatureGenerator("hamiltonian"), 0, 4)
    assert np.allclose(h, [1, 1.5, 1 + 1 / 2 + 1 / 3, 1 + 1 / 2 + 1 / 3 + 1 / 4], rtol=0, atol=1e-15)


def test_sequence_rows_offset():
    gen = FeatureGenerator("square", offset_per_node=True)
    x = generate_features(gen, 3, 2)
    assert x.tolist() == [[1, 4], [4, 9], [9, 16]]
    flat = generate_features(FeatureGenerator("square"), 3, 2)
    assert flat.tolist() == [[1, 4]] * 3


@pytest.mark.parametrize("kind, params", [
    ("normal", {"std": 0}), ("uniform", {"low": 1, "high": 1}), ("negative_binomial", {"p": 0}),
    ("binomial_coefficient", {"order": 2.5}), ("gamma", {"shape": -1}),
])
def test_bad_params(kind, params):
    with pytest.raises(FeatureParamError):
        FeatureGenerator(kind, params)


def test_unknown_kind_and_param():
    with pytest.raises(FeatureParamError):
        FeatureGenerator("zipf")
    with pytest.raises(FeatureParamError):
        FeatureGenerator("normal", {"mu": 0})


def test_heavy_tails_are_finite():
    for kind in ("pareto", "cauchy"):
        x = generate_features(FeatureGenerator(kind), 50_000, 1, seed=3)
        assert np.all(np.isfinite(x))


def test_signed_log1p():
    x = np.array([-math.e + 1, 0.0, 3.0])
    assert np.allclose(signed_log1p(x), [-1.0, 0.0, math.log(4.0)])
