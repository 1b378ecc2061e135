"""End-to-end pipeline: encoders -> variational heads -> gated fusion ->
prediction, with loss assembly under an ablation mode.
"""

from __future__ import annotations

from dataclasses import dataclass

import torch
from torch import nn

from .disentangle import LatentPair, Reconstructor, VariationalHead
from .encoders import MODALITIES, GeometryEncoder, GraphEncoder, SequenceEncoder
from .featurize import Batch
from .fusion import GateFusion, GateOutput, PredictionHead
from .losses import (
    LossBreakdown,
    LossCoefficients,
    align_infonce,
    kl_shared,
    mmd_private,
    ortho_loss,
    recon_loss,
    task_loss,
    total_loss,
)


@dataclass
class ModelConfig:
    vocab_size: int
    n_tasks: int
    task_type: str
    hidden_dim: int = 256
    d_shared: int | None = None
    d_private: int | None = None
    message_passing_steps: int = 3
    n_attention_heads: int = 2
    n_transformer_layers: int = 2
    dropout: float = 0.1
    temperature: float = 0.1

    def __post_init__(self):
        if self.d_shared is None:
            self.d_shared = self.hidden_dim // 4
        if self.d_private is None:
            self.d_private = self.hidden_dim // 4


@dataclass
class ForwardResult:
    embeddings: list[torch.Tensor]  # H_m per modality, (B, hidden)
    latents: list[LatentPair]
    gate: GateOutput
    predictions: torch.Tensor  # (B, n_tasks), raw


class MultiModalModel(nn.Module):
    """The full multi-modal disentangled representation model.

    Modality order is fixed as (sequence, graph, geometry) everywhere;
    the gate concatenation makes the order load-bearing.
    """

    def __init__(self, cfg: ModelConfig):
        super().__init__()
        self.cfg = cfg
        self.sequence_encoder = SequenceEncoder(
            cfg.vocab_size, cfg.hidden_dim, cfg.n_attention_heads, cfg.n_transformer_layers
        )
        self.graph_encoder = GraphEncoder(cfg.hidden_dim, cfg.message_passing_steps)
        self.geometry_encoder = GeometryEncoder(cfg.hidden_dim, cfg.message_passing_steps)
        self.heads = nn.ModuleDict(
            {
                m: VariationalHead(cfg.hidden_dim, cfg.d_shared, cfg.d_private, cfg.dropout, m)
                for m in MODALITIES
            }
        )
        self.decoders = nn.ModuleDict(
            {m: Reconstructor(cfg.d_shared, cfg.d_private, cfg.hidden_dim) for m in MODALITIES}
        )
        self.fusion = GateFusion(len(MODALITIES), cfg.d_shared)
        self.prediction_head = PredictionHead(cfg.d_shared, cfg.n_tasks)
        self.coefficients = LossCoefficients()
        self.double()

    def encode(self, batch: Batch) -> list[torch.Tensor]:
        return [
            self.sequence_encoder(batch),
            self.graph_encoder(batch),
            self.geometry_encoder(batch),
        ]

    def forward(
        self,
        batch: Batch,
        generator: torch.Generator | None = None,
        sample: bool = True,
    ) -> ForwardResult:
        embeddings = self.encode(batch)
        latents = [
            self.heads[m](h, generator=generator, sample=sample)
            for m, h in zip(MODALITIES, embeddings)
        ]
        shared = [lat.z_shared for lat in latents]
        gate = self.fusion(shared)
        preds = self.prediction_head(gate.output)
        return ForwardResult(embeddings=embeddings, latents=latents, gate=gate, predictions=preds)

    def compute_loss(
        self,
        batch: Batch,
        generator: torch.Generator | None = None,
        sample: bool = True,
        mode: str = "ALL",
    ) -> tuple[torch.Tensor, LossBreakdown, ForwardResult]:
        result = self.forward(batch, generator=generator, sample=sample)
        label = task_loss(result.predictions, batch.labels, batch.label_mask, self.cfg.task_type)
        regularizers: dict[str, torch.Tensor] = {}
        if mode != "LBL":
            regularizers["kl_shared"] = kl_shared(result.latents)
            regularizers["mmd_private"] = mmd_private(
                [lat.z_private for lat in result.latents], generator=generator
            )
            recons = [
                self.decoders[m](lat.z_shared, lat.z_private)
                for m, lat in zip(MODALITIES, result.latents)
            ]
            regularizers["recon"] = recon_loss(result.embeddings, recons)
        if mode == "ALL":
            regularizers["align"] = align_infonce(
                [lat.z_shared for lat in result.latents], self.cfg.temperature
            )
            regularizers["ortho"] = ortho_loss(result.latents)
        total, breakdown = total_loss(label, regularizers, self.coefficients, mode=mode)
        return total, breakdown, result
