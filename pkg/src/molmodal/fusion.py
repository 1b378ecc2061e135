"""Gated attention fusion over shared latents, and the prediction head.

The fusion pathway consumes shared latents only; private latents are not
accepted anywhere in this module, which is the structural information
bottleneck the tests assert.
"""

from __future__ import annotations

from dataclasses import dataclass

import torch
from torch import nn


@dataclass
class GateOutput:
    weights: torch.Tensor  # (B, M), nonnegative, rows sum to 1
    fused: torch.Tensor  # (B, d_s)
    output: torch.Tensor  # (B, d_s)


def fuse(weights: torch.Tensor, shared: list[torch.Tensor]) -> torch.Tensor:
    """Convex combination sum_i weights[:, i] * shared[i]."""
    stacked = torch.stack(shared, dim=1)  # (B, M, d_s)
    return (weights.unsqueeze(-1) * stacked).sum(dim=1)


class GateFusion(nn.Module):
    """Per-molecule softmax gate over modalities plus residual FFN."""

    def __init__(self, n_modalities: int, d_shared: int):
        super().__init__()
        self.n_modalities = n_modalities
        self.gate_fc1 = nn.Linear(n_modalities * d_shared, d_shared)
        self.gate_fc2 = nn.Linear(d_shared, n_modalities)
        self.ffn_fc1 = nn.Linear(d_shared, d_shared)
        self.ffn_fc2 = nn.Linear(d_shared, d_shared)

    def gate_weights(self, shared: list[torch.Tensor]) -> torch.Tensor:
        logits = self.gate_fc2(torch.relu(self.gate_fc1(torch.cat(shared, dim=-1))))
        return torch.softmax(logits, dim=-1)

    def residual_output(self, fused: torch.Tensor, shared: list[torch.Tensor]) -> torch.Tensor:
        residual = torch.stack(shared, dim=1).mean(dim=1)
        return self.ffn_fc2(torch.relu(self.ffn_fc1(fused + residual)))

    def forward(self, shared: list[torch.Tensor]) -> GateOutput:
        if len(shared) != self.n_modalities:
            raise ValueError(f"expected {self.n_modalities} modalities, got {len(shared)}")
        weights = self.gate_weights(shared)
        fused = fuse(weights, shared)
        return GateOutput(weights=weights, fused=fused, output=self.residual_output(fused, shared))


class PredictionHead(nn.Module):
    """Two-layer feedforward map from the fused vector to task outputs.

    Emits raw values; classification consumers apply sigmoid downstream.
    """

    def __init__(self, d_shared: int, n_tasks: int):
        super().__init__()
        self.fc1 = nn.Linear(d_shared, d_shared)
        self.fc2 = nn.Linear(d_shared, n_tasks)

    def forward(self, output: torch.Tensor) -> torch.Tensor:
        return self.fc2(torch.relu(self.fc1(output)))
