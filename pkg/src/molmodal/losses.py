"""The six-term training objective and its learnable coefficients.

total = label + beta*kl_shared + lambda*mmd_private + gamma*align
        + delta*ortho + eta*recon

Coefficients live as unconstrained parameters mapped through softplus so
they stay positive; they initialize so that softplus(raw) = 0.1.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import torch
from torch import nn
from torch.nn import functional as F

from .disentangle import LatentPair
from .errors import EmptyMask

MMD_BANDWIDTH_SCALES = (0.5, 1.0, 2.0, 4.0)
COEFFICIENT_INIT = 0.1
COEFFICIENT_NAMES = ("beta", "lambda", "gamma", "delta", "eta")

ABLATION_MODES = ("LBL", "BOT", "ALL")
# Which regularizers participate per ablation mode (order: kl, mmd, align, ortho, recon).
_MODE_TERMS = {
    "LBL": (False, False, False, False, False),
    "BOT": (True, True, False, False, True),
    "ALL": (True, True, True, True, True),
}


@dataclass
class LossBreakdown:
    label: float
    kl_shared: float
    mmd_private: float
    align: float
    ortho: float
    recon: float
    coefficients: tuple[float, float, float, float, float]
    total: float

    def to_dict(self) -> dict:
        return {
            "label": self.label,
            "kl_shared": self.kl_shared,
            "mmd_private": self.mmd_private,
            "align": self.align,
            "ortho": self.ortho,
            "recon": self.recon,
            "coefficients": dict(zip(COEFFICIENT_NAMES, self.coefficients)),
            "total": self.total,
        }


def task_loss(y_hat: torch.Tensor, y: torch.Tensor, mask: torch.Tensor, task_type: str) -> torch.Tensor:
    """Masked prediction loss: BCE-with-logits or squared error, averaged
    over valid entries only. Masked cells are never read.
    """
    if not mask.any():
        raise EmptyMask("no valid labels in batch")
    yh, yt = y_hat[mask], y[mask]
    if task_type == "classification":
        return F.binary_cross_entropy_with_logits(yh, yt, reduction="mean")
    return ((yt - yh) ** 2).mean()


def kl_shared(latents: list[LatentPair]) -> torch.Tensor:
    """Mean over modalities of batch-mean KL(N(mu, sigma^2) || N(0, I))."""
    terms = []
    for lat in latents:
        mu, logvar = lat.mu_shared, lat.logvar_shared
        kl = 0.5 * (mu**2 + torch.exp(logvar) - 1.0 - logvar).sum(dim=-1)
        terms.append(kl.mean())
    return torch.stack(terms).mean()


def _mmd2_unbiased(x: torch.Tensor, y: torch.Tensor) -> torch.Tensor:
    """Unbiased MMD^2 with a multi-scale RBF kernel, equal sample sizes.

    All three kernel averages exclude same-index pairs, so bitwise-equal
    sample sets give exactly zero. Bandwidths come from the median
    heuristic on the pooled sample; the median stays in the graph so the
    analytic gradient matches finite differences.
    """
    n = x.shape[0]
    if n < 2 or y.shape[0] != n:
        raise ValueError("MMD needs two equal-size samples with n >= 2")
    z = torch.cat([x, y], dim=0)
    sq = torch.cdist(z, z, p=2.0) ** 2
    off_diag = ~torch.eye(2 * n, dtype=torch.bool, device=z.device)
    median = sq[off_diag].median()
    if not torch.isfinite(median) or median <= 0:
        median = torch.tensor(1.0, dtype=z.dtype, device=z.device)

    total = torch.zeros((), dtype=z.dtype, device=z.device)
    mask = ~torch.eye(n, dtype=torch.bool, device=z.device)
    denom = n * (n - 1)
    for scale in MMD_BANDWIDTH_SCALES:
        k = torch.exp(-sq / (2.0 * scale * median))
        kxx = k[:n, :n][mask].sum() / denom
        kyy = k[n:, n:][mask].sum() / denom
        kxy = k[:n, n:][mask].sum() / denom
        total = total + kxx + kyy - 2.0 * kxy
    return total


def mmd_private(
    z_private: list[torch.Tensor], generator: torch.Generator | None = None
) -> torch.Tensor:
    """Mean over modalities of unbiased MMD^2 to a fresh N(0, I) draw."""
    terms = []
    for z in z_private:
        prior = torch.randn(z.shape, dtype=z.dtype, device=z.device, generator=generator)
        terms.append(_mmd2_unbiased(z, prior))
    return torch.stack(terms).mean()


def recon_loss(H: list[torch.Tensor], H_hat: list[torch.Tensor]) -> torch.Tensor:
    """Mean over modalities of batch-mean squared reconstruction norm."""
    terms = [((h - hh) ** 2).sum(dim=-1).mean() for h, hh in zip(H, H_hat)]
    return torch.stack(terms).mean()


def align_infonce(z_shared: list[torch.Tensor], temperature: float) -> torch.Tensor:
    """Cross-modal InfoNCE averaged over all ordered modality pairs.

    For each pair, sample b's anchor in modality i must pick out its own
    positive in modality j against the other in-batch negatives; cosine
    similarities are divided by the temperature.
    """
    m = len(z_shared)
    if m < 2:
        raise ValueError("alignment needs at least two modalities")
    normed = [F.normalize(z, dim=-1, eps=1e-12) for z in z_shared]
    b = normed[0].shape[0]
    target = torch.arange(b, device=normed[0].device)
    losses = []
    for i in range(m):
        for j in range(m):
            if i == j:
                continue
            logits = normed[i] @ normed[j].T / temperature
            losses.append(F.cross_entropy(logits, target))
    return torch.stack(losses).mean()


def ortho_loss(latents: list[LatentPair]) -> torch.Tensor:
    """Mean absolute cosine between shared and private latents.

    If widths differ, the longer vector is truncated to the shorter width
    before normalization (a fixed projection, not learned).
    """
    terms = []
    for lat in latents:
        zs, zp = lat.z_shared, lat.z_private
        d = min(zs.shape[-1], zp.shape[-1])
        zs, zp = zs[..., :d], zp[..., :d]
        zs = F.normalize(zs, dim=-1, eps=1e-12)
        zp = F.normalize(zp, dim=-1, eps=1e-12)
        terms.append((zs * zp).sum(dim=-1).abs().mean())
    return torch.stack(terms).mean()


def _inverse_softplus(y: float) -> float:
    return math.log(math.expm1(y))


class LossCoefficients(nn.Module):
    """Learnable positive coefficients (beta, lambda, gamma, delta, eta)."""

    def __init__(self, init: float = COEFFICIENT_INIT):
        super().__init__()
        self.raw = nn.Parameter(torch.full((5,), _inverse_softplus(init), dtype=torch.float64))

    def values(self) -> torch.Tensor:
        return F.softplus(self.raw)


def total_loss(
    label: torch.Tensor,
    regularizers: dict[str, torch.Tensor],
    coefficients: LossCoefficients,
    mode: str = "ALL",
) -> tuple[torch.Tensor, LossBreakdown]:
    """Combine the six terms under the given ablation mode.

    Terms excluded by the mode are absent from the returned graph entirely
    (their coefficients report as hard zero), not merely zero-weighted.
    """
    if mode not in ABLATION_MODES:
        raise ValueError(f"unknown ablation mode {mode!r}")
    active = _MODE_TERMS[mode]
    names = ("kl_shared", "mmd_private", "align", "ortho", "recon")
    coeff = coefficients.values()

    total = label
    reported_terms = []
    reported_coeffs = []
    for idx, name in enumerate(names):
        if active[idx]:
            term = regularizers[name]
            total = total + coeff[idx] * term
            reported_terms.append(float(term.detach()))
            reported_coeffs.append(float(coeff[idx].detach()))
        else:
            reported_terms.append(0.0)
            reported_coeffs.append(0.0)

    breakdown = LossBreakdown(
        label=float(label.detach()),
        kl_shared=reported_terms[0],
        mmd_private=reported_terms[1],
        align=reported_terms[2],
        ortho=reported_terms[3],
        recon=reported_terms[4],
        coefficients=tuple(reported_coeffs),
        total=float(total.detach()),
    )
    return total, breakdown
