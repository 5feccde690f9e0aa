import math

import numpy as np
import pytest
import torch
from hypothesis import given, settings, strategies as st

from engine_helpers import max_fd_error, random_batch, random_sample, small_model
from rwgkit.engine import (BACKBONES, EvaluationError, GraphClassifier, GraphTensors, ModelConfig,
                           NumericalError, ShapeError, TrainConfig, conditional_kl, cross_entropy,
                           evaluate, forward, gradients, load_checkpoint, make_batch, save_checkpoint,
                           train)
from rwgkit.graph import AttributedGraph, GraphSample


@pytest.mark.parametrize("backbone", BACKBONES)
@pytest.mark.parametrize("rec", [False, True])
def test_finite_differences(backbone, rec):
    model = small_model(backbone, rec, seed=3)
    _, batch = random_batch(11)
    errs = max_fd_error(model, batch)
    assert max(errs.values()) <= 1e-4, errs


@pytest.mark.parametrize("backbone", BACKBONES)
def test_permutation_invariance(backbone):
    rng = np.random.default_rng(0)
    model = small_model(backbone, rec=True, hidden=8)
    s = random_sample(rng, 9, 3, 0)
    base = forward(model, s)
    for _ in range(20):
        perm = rng.permutation(9)
        inv = np.argsort(perm)
        g = s.graph
        pg = AttributedGraph(9, [(int(inv[u]), int(inv[v])) for u, v in g.edges], False,
                             g.node_features[perm])
        out = forward(model, GraphSample(pg, 0, "train"))
        assert torch.allclose(out, base, rtol=0, atol=1e-12)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000), st.sampled_from(BACKBONES))
def test_softmax_normalised(seed, backbone):
    model = small_model(backbone, rec=seed % 2 == 0, seed=seed)
    _, batch = random_batch(seed, graphs=4)
    probs = model(batch)
    assert torch.all(probs >= 0)
    assert torch.max(torch.abs(probs.sum(dim=1) - 1)).item() <= 1e-12


def test_zero_weights_uniform():
    model = GraphClassifier(ModelConfig("gcn", 3, 4, hidden_dim=5))
    with torch.no_grad():
        for p in model.parameters():
            p.zero_()
    s = GraphSample(AttributedGraph(1, [], False, np.ones((1, 3))), 0, "train")
    assert torch.allclose(forward(model, s), torch.full((4,), 0.25, dtype=torch.float64))


def test_gin_separates_triangle_and_path():
    model = GraphClassifier(ModelConfig("gin", 1, 2, hidden_dim=8), seed=5)
    tri = GraphSample(AttributedGraph(3, [(0, 1), (1, 2), (0, 2)], False, np.ones((3, 1))), 0, "train")
    path = GraphSample(AttributedGraph(3, [(0, 1), (1, 2)], False, np.ones((3, 1))), 0, "train")
    e1 = model.embed(make_batch([GraphTensors.from_sample(tri)]))
    e2 = model.embed(make_batch([GraphTensors.from_sample(path)]))
    assert not torch.allclose(e1, e2)


def test_shape_mismatch():
    model = GraphClassifier(ModelConfig("gcn", 4, 2))
    s = GraphSample(AttributedGraph(2, [(0, 1)], False, np.ones((2, 3))), 0, "train")
    with pytest.raises(ShapeError):
        forward(model, s)


def test_cross_entropy_examples():
    labels = torch.tensor([0, 3, 1])
    uniform = torch.full((3, 5), 0.2, dtype=torch.float64)
    assert abs(cross_entropy(uniform, labels).item() - math.log(5)) < 1e-12
    assert abs(conditional_kl(uniform, labels).item() - math.log(5)) < 1e-12
    half = torch.tensor([[0.5, 0.5]], dtype=torch.float64)
    assert abs(cross_entropy(half, torch.tensor([1])).item() - math.log(2)) < 1e-12
    onehot = torch.eye(3, dtype=torch.float64)
    assert cross_entropy(onehot, torch.arange(3)).item() == 0.0
    assert conditional_kl(onehot, torch.arange(3)).item() == 0.0


def test_clamp_keeps_loss_finite():
    probs = torch.tensor([[1.0, 0.0]], dtype=torch.float64)
    assert abs(cross_entropy(probs, torch.tensor([1])).item() - (-math.log(1e-12))) < 1e-9


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_cross_entropy_equals_kl(seed):
    g = torch.Generator().manual_seed(seed)
    probs = torch.softmax(torch.randn((8, 5), generator=g, dtype=torch.float64) * 3, dim=1)
    labels = torch.randint(0, 5, (8,), generator=g)
    assert abs(cross_entropy(probs, labels).item() - conditional_kl(probs, labels).item()) <= 1e-9


def test_zero_features_zero_first_layer_grad():
    model = small_model("gcn", rec=False)
    samples, _ = random_batch(2)
    zeros = [s.evolve(graph=s.graph.with_features(np.zeros_like(s.graph.node_features))) for s in samples]
    batch = make_batch([GraphTensors.from_sample(s) for s in zeros])
    grads = gradients(model, batch)
    assert torch.all(grads["layers.0.lin.weight"] == 0)


def test_duplicated_batch_same_gradients():
    model = small_model("cheb", rec=True)
    samples, batch = random_batch(4)
    doubled = make_batch([GraphTensors.from_sample(s) for s in samples + samples])
    a, b = gradients(model, batch), gradients(model, doubled)
    for k in a:
        assert torch.allclose(a[k], b[k], rtol=1e-10, atol=1e-14)


def test_non_finite_input_names_layer():
    model = small_model("gcn", rec=False)
    bad = GraphSample(AttributedGraph(2, [(0, 1)], False, np.array([[np.inf, 0, 0], [0, 0, 0]])), 0, "train")
    with pytest.raises(NumericalError, match="layer 0"):
        forward(model, bad)


def _toy(n, seed, split="train"):
    rng = np.random.default_rng(seed)
    out = []
    for i in range(n):
        label = i % 2
        x = rng.normal(size=(4, 2)) + (2.0 if label else -2.0)
        out.append(GraphSample(AttributedGraph(4, [(0, 1), (1, 2), (2, 3)], False, x), label, split))
    return out


def test_separable_toy_reaches_full_accuracy_and_is_deterministic():
    tr, te = _toy(64, 0), _toy(32, 1, "test")
    runs = []
    for _ in range(2):
        model = GraphClassifier(ModelConfig("gcn", 2, 2, hidden_dim=8), seed=1)
        res = train(model, tr, [], te, TrainConfig(epochs=20, seed=1))
        runs.append([(r.train_loss, r.test_acc) for r in res.trace])
        assert evaluate(model, tr) == 1.0
    assert runs[0] == runs[1]


def test_uniform_predictions_chance_level():
    model = GraphClassifier(ModelConfig("gcn", 2, 5, hidden_dim=4))
    with torch.no_grad():
        for p in model.parameters():
            p.zero_()
    samples = [GraphSample(AttributedGraph(1, [], False, np.ones((1, 2))), i % 5, "test") for i in range(50)]
    assert evaluate(model, samples) == 0.2  # ties go to class 0


def test_empty_split_raises():
    model = GraphClassifier(ModelConfig("gcn", 2, 2))
    with pytest.raises(EvaluationError):
        evaluate(model, [])


def test_checkpoint_round_trip(tmp_path):
    a = small_model("gin", rec=True, seed=1)
    b = small_model("gin", rec=True, seed=2)
    save_checkpoint(a, tmp_path / "m.txt")
    load_checkpoint(b, tmp_path / "m.txt")
    for (n1, p1), (n2, p2) in zip(a.named_parameters(), b.named_parameters()):
        assert n1 == n2 and torch.equal(p1, p2)
    assert (tmp_path / "m.txt").read_text().startswith("# layers.0.")
