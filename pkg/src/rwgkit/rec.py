"""REC: per-node sigmoid gates with a decaying offset gamma."""

from __future__ import annotations

from dataclasses import dataclass

import torch
from torch import nn

GATE_HIDDEN = 16


class ShapeError(ValueError):
    pass


@dataclass(frozen=True)
class RecConfig:
    gamma_init: float = 1.0
    gamma_min: float = 0.2
    epsilon: float = 0.01
    enabled: bool = True

    def __post_init__(self):
        if self.gamma_min > self.gamma_init:
            raise ValueError("gamma_min must be <= gamma_init")
        if not 0.0 < self.epsilon < 1.0:
            raise ValueError("epsilon must lie in (0, 1)")

    def to_json(self) -> dict:
        return dict(self.__dict__)


def gamma(t: int, cfg: RecConfig = RecConfig()) -> float:
    """max(gamma_init * (1 - epsilon)^t, gamma_min)."""
    if t < 0:
        raise ValueError("t must be >= 0")
    return max(cfg.gamma_init * (1.0 - cfg.epsilon) ** t, cfg.gamma_min)


class RecGate(nn.Module):
    """delta: Linear(d, 16) -> tanh -> Linear(16, 1), output layer zero-initialised.

    One gate serves every node of its layer.
    """

    def __init__(self, in_dim: int, generator: torch.Generator | None = None):
        super().__init__()
        self.in_dim = in_dim
        self.hidden = nn.Linear(in_dim, GATE_HIDDEN, dtype=torch.float64)
        self.out = nn.Linear(GATE_HIDDEN, 1, dtype=torch.float64)
        bound = 1.0 / in_dim ** 0.5
        with torch.no_grad():
            self.hidden.weight.uniform_(-bound, bound, generator=generator)
            self.hidden.bias.zero_()
            self.out.weight.zero_()
            self.out.bias.zero_()

    def forward(self, h: torch.Tensor) -> torch.Tensor:
        if h.shape[-1] != self.in_dim:
            raise ShapeError(f"gate expects dim {self.in_dim}, got {h.shape[-1]}")
        return self.out(torch.tanh(self.hidden(h)))


def mask_scale(h: torch.Tensor, gate: RecGate, g: float) -> torch.Tensor:
    """Per-node scalar sigmoid(g + delta(h)), shape (num_nodes, 1)."""
    return torch.sigmoid(g + gate(h))


def rec_mask(h: torch.Tensor, gate: RecGate, g: float) -> torch.Tensor:
    return mask_scale(h, gate, g) * h


class RecWrapped(nn.Module):
    """A backbone layer whose input is masked before the weight multiply."""

    def __init__(self, layer: nn.Module, gate: RecGate, g: float | None = None):
        super().__init__()
        self.layer = layer
        self.gate = gate
        self.g = g

    def forward(self, h, batch, g: float | None = None):
        g = self.g if g is None else g
        return self.layer(rec_mask(h, self.gate, g), batch)


def wrap_layer(layer: nn.Module, state: RecGate, g: float | None = None) -> RecWrapped:
    """Wrap ``layer`` so the centre node and all neighbours see masked inputs.

    ``g`` fixes the offset; when it is None the caller passes it per forward
    call, which is how the training loop follows the epoch schedule.
    """
    return RecWrapped(layer, state, g)
