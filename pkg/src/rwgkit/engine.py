"""Small deterministic GNN engine: GCN / GIN / Chebyshev backbones on float64 torch.

Batches are disjoint unions of graphs; message passing multiplies by per-batch
sparse operators and readout pools with ``index_add_``.
Directed graphs are symmetrised for propagation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import torch
from torch import nn

from .graph import GraphSample, SeedStream
from .rec import RecConfig, RecGate, RecWrapped, gamma

DTYPE = torch.float64
PROB_CLAMP = 1e-12
BACKBONES = ("gcn", "gin", "cheb")


class NumericalError(ArithmeticError):
    pass


class ShapeError(ValueError):
    pass


class EvaluationError(ValueError):
    pass


# ---------------------------------------------------------------------------
# Batching
# ---------------------------------------------------------------------------

@dataclass
class GraphTensors:
    """Per-graph arrays precomputed once: features and symmetric neighbour pairs."""

    x: np.ndarray
    src: np.ndarray
    dst: np.ndarray
    label: int

    @classmethod
    def from_sample(cls, s: GraphSample) -> "GraphTensors":
        pairs = set()
        for u, v in s.graph.edges:
            if u != v:
                pairs.add((u, v))
                pairs.add((v, u))
        pairs = sorted(pairs)
        src = np.array([p[0] for p in pairs], dtype=np.int64)
        dst = np.array([p[1] for p in pairs], dtype=np.int64)
        return cls(np.asarray(s.graph.node_features, dtype=np.float64), src, dst, int(s.label))


@dataclass
class GraphBatch:
    x: torch.Tensor
    src: torch.Tensor          # message source (u in N(v))
    dst: torch.Tensor          # message target v
    graph_index: torch.Tensor  # node -> graph
    num_graphs: int
    labels: torch.Tensor
    deg: torch.Tensor          # neighbour count per node (no self-loop)
    counts: torch.Tensor       # nodes per graph
    _ops: dict = field(default_factory=dict, repr=False)

    @property
    def num_nodes(self) -> int:
        return int(self.x.shape[0])

    def operator(self, kind: str) -> torch.Tensor:
        """Sparse propagation matrix (rows = receivers), built once per batch.

        ``adj``: A.  ``gcn``: D^-1/2 (A + I) D^-1/2 with D from A + I.
        ``cheb``: -D^-1/2 A D^-1/2 (isolated nodes get zero rows).
        """
        if kind not in self._ops:
            n = self.num_nodes
            src, dst = self.src, self.dst
            if kind == "adj":
                idx, val = torch.stack([dst, src]), torch.ones(len(src), dtype=DTYPE)
            elif kind == "gcn":
                inv = (self.deg + 1.0).rsqrt()
                loops = torch.arange(n)
                idx = torch.stack([torch.cat([dst, loops]), torch.cat([src, loops])])
                val = torch.cat([inv[src] * inv[dst], inv * inv])
            elif kind == "cheb":
                inv = torch.where(self.deg > 0, self.deg.clamp(min=1).rsqrt(), torch.zeros_like(self.deg))
                idx, val = torch.stack([dst, src]), -(inv[src] * inv[dst])
            else:
                raise KeyError(kind)
            self._ops[kind] = torch.sparse_coo_tensor(idx, val, (n, n), check_invariants=False).coalesce()
        return self._ops[kind]


def make_batch(items: list[GraphTensors]) -> GraphBatch:
    xs, srcs, dsts, gidx, labels = [], [], [], [], []
    offset = 0
    for i, t in enumerate(items):
        n = t.x.shape[0]
        xs.append(t.x)
        srcs.append(t.src + offset)
        dsts.append(t.dst + offset)
        gidx.append(np.full(n, i, dtype=np.int64))
        labels.append(t.label)
        offset += n
    x = torch.from_numpy(np.vstack(xs)) if xs else torch.zeros((0, 0), dtype=DTYPE)
    src = torch.from_numpy(np.concatenate(srcs)) if srcs else torch.zeros(0, dtype=torch.int64)
    dst = torch.from_numpy(np.concatenate(dsts)) if dsts else torch.zeros(0, dtype=torch.int64)
    graph_index = torch.from_numpy(np.concatenate(gidx)) if gidx else torch.zeros(0, dtype=torch.int64)
    deg = torch.zeros(offset, dtype=DTYPE).index_add_(0, dst, torch.ones(len(dst), dtype=DTYPE))
    counts = torch.zeros(len(items), dtype=DTYPE).index_add_(
        0, graph_index, torch.ones(offset, dtype=DTYPE))
    return GraphBatch(x, src, dst, graph_index, len(items), torch.tensor(labels, dtype=torch.int64),
                      deg, counts)


def _propagate(h: torch.Tensor, batch: GraphBatch, kind: str) -> torch.Tensor:
    return torch.sparse.mm(batch.operator(kind), h)


# ---------------------------------------------------------------------------
# Layers
# ---------------------------------------------------------------------------

def _init_linear(lin: nn.Linear, gen: torch.Generator) -> nn.Linear:
    bound = 1.0 / math.sqrt(lin.in_features)
    with torch.no_grad():
        lin.weight.uniform_(-bound, bound, generator=gen)
        if lin.bias is not None:
            lin.bias.zero_()
    return lin


class GCNLayer(nn.Module):
    """h' = D^-1/2 (A + I) D^-1/2 h W + b."""

    def __init__(self, d_in, d_out, gen):
        super().__init__()
        self.lin = _init_linear(nn.Linear(d_in, d_out, dtype=DTYPE), gen)

    def forward(self, h, batch: GraphBatch):
        return _propagate(h @ self.lin.weight.T, batch, "gcn") + self.lin.bias


class GINLayer(nn.Module):
    """h' = MLP((1 + eps) h + sum of neighbours), eps learnable."""

    def __init__(self, d_in, d_out, gen):
        super().__init__()
        self.lin1 = _init_linear(nn.Linear(d_in, d_out, dtype=DTYPE), gen)
        self.lin2 = _init_linear(nn.Linear(d_out, d_out, dtype=DTYPE), gen)
        self.eps = nn.Parameter(torch.zeros(1, dtype=DTYPE))

    def forward(self, h, batch: GraphBatch):
        agg = (1.0 + self.eps) * h + _propagate(h, batch, "adj")
        return self.lin2(torch.relu(self.lin1(agg)))


class ChebLayer(nn.Module):
    """sum_k T_k(L~) h W_k with L~ = -D^-1/2 A D^-1/2 (lambda_max taken as 2); K terms."""

    def __init__(self, d_in, d_out, gen, k: int = 2):
        super().__init__()
        if k < 1:
            raise ValueError("Chebyshev order K must be >= 1")
        self.k = k
        # a single bias, carried by the T_0 term
        self.lins = nn.ModuleList(_init_linear(nn.Linear(d_in, d_out, bias=(i == 0), dtype=DTYPE), gen)
                                  for i in range(k))

    def forward(self, h, batch: GraphBatch):
        t_prev, t_cur = h, _propagate(h, batch, "cheb")
        out = self.lins[0](t_prev)
        if self.k > 1:
            out = out + self.lins[1](t_cur)
        for i in range(2, self.k):
            t_next = 2 * _propagate(t_cur, batch, "cheb") - t_prev
            out = out + self.lins[i](t_next)
            t_prev, t_cur = t_cur, t_next
        return out


_LAYERS = {"gcn": GCNLayer, "gin": GINLayer, "cheb": ChebLayer}


# ---------------------------------------------------------------------------
# Model
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ModelConfig:
    backbone: str = "gcn"
    in_dim: int = 5
    num_classes: int = 5
    hidden_dim: int = 64
    num_layers: int = 2
    cheb_k: int = 2
    rec: RecConfig | None = None

    def __post_init__(self):
        if self.backbone not in BACKBONES:
            raise ValueError(f"unknown backbone {self.backbone!r}")
        if self.num_layers < 1 or self.hidden_dim < 1:
            raise ValueError("num_layers and hidden_dim must be >= 1")

    @property
    def rec_enabled(self) -> bool:
        return self.rec is not None and self.rec.enabled

    def to_json(self) -> dict:
        d = dict(self.__dict__)
        d["rec"] = None if self.rec is None else self.rec.to_json()
        return d


class GraphClassifier(nn.Module):
    """Backbone layers (optionally REC-wrapped) -> ReLU -> mean pool -> linear -> softmax."""

    def __init__(self, cfg: ModelConfig, seed: int = 0):
        super().__init__()
        self.cfg = cfg
        gen = torch.Generator().manual_seed(SeedStream(seed).derive(0, "init") & ((1 << 63) - 1))
        dims = [cfg.in_dim] + [cfg.hidden_dim] * cfg.num_layers
        layers = []
        for i in range(cfg.num_layers):
            kw = {"k": cfg.cheb_k} if cfg.backbone == "cheb" else {}
            layer = _LAYERS[cfg.backbone](dims[i], dims[i + 1], gen, **kw)
            if cfg.rec_enabled:
                layer = RecWrapped(layer, RecGate(dims[i], gen))
            layers.append(layer)
        self.layers = nn.ModuleList(layers)
        self.head = _init_linear(nn.Linear(cfg.hidden_dim, cfg.num_classes, dtype=DTYPE), gen)
        self.gamma_value = cfg.rec.gamma_init if cfg.rec_enabled else 0.0

    def set_epoch(self, t: int) -> None:
        if self.cfg.rec_enabled:
            self.gamma_value = gamma(t, self.cfg.rec)

    def embed(self, batch: GraphBatch) -> torch.Tensor:
        if batch.x.shape[1] != self.cfg.in_dim:
            raise ShapeError(f"model expects feature_dim {self.cfg.in_dim}, batch has {batch.x.shape[1]}")
        h = batch.x
        for i, layer in enumerate(self.layers):
            h = layer(h, batch, self.gamma_value) if self.cfg.rec_enabled else layer(h, batch)
            h = torch.relu(h)
            if not torch.isfinite(h).all():
                raise NumericalError(f"non-finite activation after layer {i} ({self.cfg.backbone})")
        pooled = torch.zeros((batch.num_graphs, h.shape[1]), dtype=DTYPE).index_add_(0, batch.graph_index, h)
        return pooled / batch.counts.clamp(min=1).unsqueeze(1)

    def logits(self, batch: GraphBatch) -> torch.Tensor:
        out = self.head(self.embed(batch))
        if not torch.isfinite(out).all():
            raise NumericalError("non-finite logits in the head layer")
        return out

    def forward(self, batch: GraphBatch) -> torch.Tensor:
        return torch.softmax(self.logits(batch), dim=1)


def forward(model: GraphClassifier, sample: GraphSample) -> torch.Tensor:
    """Class probability vector for one sample."""
    return model(make_batch([GraphTensors.from_sample(sample)]))[0]


# ---------------------------------------------------------------------------
# Losses
# ---------------------------------------------------------------------------

def cross_entropy(probs: torch.Tensor, labels: torch.Tensor) -> torch.Tensor:
    """(1/n) sum_i log(1 / p_i[y_i]) with p clamped at 1e-12."""
    p = probs[torch.arange(len(labels)), labels].clamp(min=PROB_CLAMP)
    return -(torch.log(p)).mean()


def conditional_kl(probs: torch.Tensor, labels: torch.Tensor) -> torch.Tensor:
    """(1/n) sum_i sum_Y p(Y|G_i) log(p / q) with p one-hot at the label (0 log 0 = 0)."""
    n, c = probs.shape
    onehot = torch.zeros((n, c), dtype=probs.dtype)
    onehot[torch.arange(n), labels] = 1.0
    q = probs.clamp(min=PROB_CLAMP)
    safe_p = torch.where(onehot > 0, onehot, torch.ones_like(onehot))
    terms = torch.where(onehot > 0, onehot * (torch.log(safe_p) - torch.log(q)), torch.zeros_like(q))
    return terms.sum(dim=1).mean()


def l2_penalty(model: nn.Module) -> torch.Tensor:
    return sum((p * p).sum() for p in model.parameters())


def objective(model: GraphClassifier, batch: GraphBatch, weight_decay: float) -> torch.Tensor:
    return cross_entropy(model(batch), batch.labels) + 0.5 * weight_decay * l2_penalty(model)


def gradients(model: GraphClassifier, batch: GraphBatch, weight_decay: float = 0.0) -> dict:
    """Reverse-mode gradients of the objective w.r.t. every named parameter."""
    model.zero_grad()
    loss = objective(model, batch, weight_decay)
    loss.backward()
    out = {}
    for name, p in model.named_parameters():
        g = p.grad if p.grad is not None else torch.zeros_like(p)
        if not torch.isfinite(g).all():
            raise NumericalError(f"non-finite gradient for {name}")
        out[name] = g.detach().clone()
    return out


# ---------------------------------------------------------------------------
# Training
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 0.01
    weight_decay: float = 5e-4
    batch_size: int = 32
    epochs: int = 50
    optimizer: str = "adam"
    seed: int = 0

    def __post_init__(self):
        if self.learning_rate <= 0 or self.batch_size < 1 or self.epochs < 1:
            raise ValueError("learning_rate, batch_size and epochs must be positive")
        if self.optimizer not in ("adam", "sgd"):
            raise ValueError(f"unknown optimizer {self.optimizer!r}")

    def to_json(self) -> dict:
        return dict(self.__dict__)


@dataclass
class EpochRecord:
    epoch: int
    train_loss: float
    val_acc: float
    test_acc: float


@dataclass
class TrainResult:
    model: GraphClassifier
    trace: list[EpochRecord] = field(default_factory=list)

    @property
    def final_test_acc(self) -> float:
        return self.trace[-1].test_acc


def predict(model: GraphClassifier, items: list[GraphTensors], batch_size: int = 256) -> np.ndarray:
    """Argmax class per item; ties go to the lowest index."""
    out = []
    with torch.no_grad():
        for i in range(0, len(items), batch_size):
            probs = model(make_batch(items[i:i + batch_size]))
            out.append(torch.argmax(probs, dim=1).numpy())
    return np.concatenate(out) if out else np.zeros(0, dtype=np.int64)


def evaluate(model: GraphClassifier, samples) -> float:
    items = [s if isinstance(s, GraphTensors) else GraphTensors.from_sample(s) for s in samples]
    if not items:
        raise EvaluationError("cannot evaluate on an empty split")
    pred = predict(model, items)
    labels = np.array([t.label for t in items])
    return float((pred == labels).mean())


def train(model: GraphClassifier, train_samples, val_samples, test_samples, cfg: TrainConfig,
          on_epoch=None) -> TrainResult:
    """Mini-batch training; per-epoch shuffle from the derived seed; gamma advances per epoch."""
    torch.set_num_threads(1)
    tr = [GraphTensors.from_sample(s) for s in train_samples]
    va = [GraphTensors.from_sample(s) for s in val_samples]
    te = [GraphTensors.from_sample(s) for s in test_samples]
    if not tr:
        raise EvaluationError("empty training split")
    if cfg.optimizer == "adam":
        opt = torch.optim.Adam(model.parameters(), lr=cfg.learning_rate, weight_decay=0.0)
    else:
        opt = torch.optim.SGD(model.parameters(), lr=cfg.learning_rate, weight_decay=0.0)
    stream = SeedStream(cfg.seed)
    result = TrainResult(model)
    for epoch in range(cfg.epochs):
        model.set_epoch(epoch)
        model.train()
        order = stream.rng(epoch, "shuffle").permutation(len(tr))
        total, seen = 0.0, 0
        for i in range(0, len(tr), cfg.batch_size):
            batch = make_batch([tr[int(j)] for j in order[i:i + cfg.batch_size]])
            opt.zero_grad()
            loss = objective(model, batch, cfg.weight_decay)
            if not torch.isfinite(loss):
                raise NumericalError(f"non-finite loss at epoch {epoch}")
            loss.backward()
            opt.step()
            total += float(loss.detach()) * batch.num_graphs
            seen += batch.num_graphs
        model.eval()
        rec = EpochRecord(epoch, total / seen,
                          evaluate(model, va) if va else float("nan"),
                          evaluate(model, te) if te else float("nan"))
        result.trace.append(rec)
        if on_epoch is not None:
            on_epoch(rec)
    return result


def save_checkpoint(model: nn.Module, path) -> None:
    """Plain-text parameter dump: a ``# name rows cols`` header then one row per line."""
    with open(path, "w", encoding="utf-8") as fh:
        for name, p in model.named_parameters():
            arr = p.detach().numpy()
            mat = arr.reshape(arr.shape[0], -1) if arr.ndim > 1 else arr.reshape(1, -1)
            fh.write(f"# {name} {' '.join(str(s) for s in arr.shape)}\n")
            for row in mat:
                fh.write(" ".join(format(float(v), ".17g") for v in row) + "\n")


def load_checkpoint(model: nn.Module, path) -> None:
    params = dict(model.named_parameters())
    with open(path, encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    i = 0
    with torch.no_grad():
        while i < len(lines):
            head = lines[i].split()
            name, shape = head[1], tuple(int(s) for s in head[2:])
            rows = shape[0] if len(shape) > 1 else 1
            vals = [float(v) for line in lines[i + 1:i + 1 + rows] for v in line.split()]
            params[name].copy_(torch.tensor(vals, dtype=DTYPE).reshape(shape))
            i += 1 + rows
