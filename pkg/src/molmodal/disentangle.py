"""Per-modality variational heads: shared/private Gaussian latents plus an
embedding reconstructor for the reconstruction loss.
"""

from __future__ import annotations

from dataclasses import dataclass

import torch
from torch import nn

LOGVAR_MIN = -10.0
LOGVAR_MAX = 10.0


@dataclass
class LatentPair:
    mu_shared: torch.Tensor
    logvar_shared: torch.Tensor
    z_shared: torch.Tensor
    mu_private: torch.Tensor
    logvar_private: torch.Tensor
    z_private: torch.Tensor
    modality: str


def reparameterize(
    mu: torch.Tensor,
    logvar: torch.Tensor,
    generator: torch.Generator | None,
    sample: bool = True,
) -> torch.Tensor:
    """z = mu + exp(0.5*logvar) * eps, eps ~ N(0, I); eps = 0 when sample=False."""
    if not sample:
        return mu.clone()
    eps = torch.randn(mu.shape, dtype=mu.dtype, device=mu.device, generator=generator)
    return mu + torch.exp(0.5 * logvar) * eps


class VariationalHead(nn.Module):
    """Maps a pooled modality embedding to shared and private latents.

    Trunk: Dropout(LayerNorm(ReLU(Linear(H)))), then two parallel linear
    heads emitting (mu, logvar) each; logvar is clamped to [-10, 10].
    """

    def __init__(self, hidden_dim: int, d_shared: int, d_private: int, dropout: float, modality: str):
        super().__init__()
        self.modality = modality
        self.trunk = nn.Linear(hidden_dim, hidden_dim)
        self.norm = nn.LayerNorm(hidden_dim)
        self.dropout = nn.Dropout(dropout)
        self.head_shared = nn.Linear(hidden_dim, 2 * d_shared)
        self.head_private = nn.Linear(hidden_dim, 2 * d_private)
        self.d_shared = d_shared
        self.d_private = d_private

    def forward(
        self,
        embedding: torch.Tensor,
        generator: torch.Generator | None = None,
        sample: bool = True,
    ) -> LatentPair:
        h = self.dropout(self.norm(torch.relu(self.trunk(embedding))))
        mu_s, logvar_s = self.head_shared(h).chunk(2, dim=-1)
        mu_p, logvar_p = self.head_private(h).chunk(2, dim=-1)
        logvar_s = logvar_s.clamp(LOGVAR_MIN, LOGVAR_MAX)
        logvar_p = logvar_p.clamp(LOGVAR_MIN, LOGVAR_MAX)
        return LatentPair(
            mu_shared=mu_s,
            logvar_shared=logvar_s,
            z_shared=reparameterize(mu_s, logvar_s, generator, sample),
            mu_private=mu_p,
            logvar_private=logvar_p,
            z_private=reparameterize(mu_p, logvar_p, generator, sample),
            modality=self.modality,
        )


class Reconstructor(nn.Module):
    """Decodes concat(z_shared, z_private) back to embedding width."""

    def __init__(self, d_shared: int, d_private: int, hidden_dim: int):
        super().__init__()
        self.fc1 = nn.Linear(d_shared + d_private, hidden_dim)
        self.fc2 = nn.Linear(hidden_dim, hidden_dim)

    def forward(self, z_shared: torch.Tensor, z_private: torch.Tensor) -> torch.Tensor:
        return self.fc2(torch.relu(self.fc1(torch.cat([z_shared, z_private], dim=-1))))
