"""Finite-difference verification of analytic gradients.

Central differences with a fixed step in double precision, compared
against autograd per parameter group. Noise draws are pinned by reseeding
the generator before every evaluation so the loss is a deterministic
function of the parameters.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Iterable

import torch

from .featurize import Batch
from .model import MultiModalModel

DEFAULT_FD_STEP = 1e-5
DEFAULT_TOLERANCE = 1e-4
MAX_ENTRIES_PER_TENSOR = 24


def relative_error(a: float, f: float) -> float:
    # the floor turns the comparison absolute (tol * 1e-6) for gradients
    # that are themselves below finite-difference noise scale
    denom = max(abs(a), abs(f), 1e-6)
    return abs(a - f) / denom


@dataclass
class GroupReport:
    name: str
    n_checked: int
    max_rel_err: float
    passed: bool


@dataclass
class GradCheckReport:
    groups: list[GroupReport]
    tolerance: float

    @property
    def passed(self) -> bool:
        return all(g.passed for g in self.groups)

    def lines(self) -> list[str]:
        out = []
        for g in self.groups:
            status = "PASS" if g.passed else "FAIL"
            out.append(f"{status}  {g.name:40s} entries={g.n_checked:4d} max_rel_err={g.max_rel_err:.3e}")
        return out


def check_gradients(
    loss_fn: Callable[[], torch.Tensor],
    named_params: Iterable[tuple[str, torch.Tensor]],
    tolerance: float = DEFAULT_TOLERANCE,
    fd_step: float = DEFAULT_FD_STEP,
    max_entries: int = MAX_ENTRIES_PER_TENSOR,
    grad_scale: dict[str, float] | None = None,
) -> GradCheckReport:
    """Compare autograd gradients of loss_fn against central differences.

    ``loss_fn`` must be deterministic and differentiable w.r.t. the given
    parameters. Large tensors are subsampled to ``max_entries`` entries
    (deterministically). ``grad_scale`` multiplies the analytic gradient of
    named groups, used only to verify the harness flags corrupted
    gradients.
    """
    params = list(named_params)
    tensors = [p for _, p in params]
    loss = loss_fn()
    grads = torch.autograd.grad(loss, tensors, allow_unused=True)

    groups: list[GroupReport] = []
    for (name, p), g in zip(params, grads):
        analytic = torch.zeros_like(p) if g is None else g
        if grad_scale and name in grad_scale:
            analytic = analytic * grad_scale[name]
        flat = p.detach().reshape(-1)
        n = flat.numel()
        if n <= max_entries:
            idx = range(n)
        else:
            stride = n / max_entries
            idx = sorted({int(i * stride) for i in range(max_entries)})
        max_err = 0.0
        checked = 0
        analytic_flat = analytic.reshape(-1)
        for i in idx:
            orig = flat[i].item()
            # mutate under no_grad, but evaluate the loss with grad enabled
            # so it follows the exact numerical path autograd differentiates
            with torch.no_grad():
                flat[i] = orig + fd_step
            up = float(loss_fn().detach())
            with torch.no_grad():
                flat[i] = orig - fd_step
            down = float(loss_fn().detach())
            with torch.no_grad():
                flat[i] = orig
            fd = (up - down) / (2.0 * fd_step)
            max_err = max(max_err, relative_error(float(analytic_flat[i]), fd))
            checked += 1
        groups.append(
            GroupReport(name=name, n_checked=checked, max_rel_err=max_err, passed=max_err < tolerance)
        )
    return GradCheckReport(groups=groups, tolerance=tolerance)


def gradient_check(
    model: MultiModalModel,
    batch: Batch,
    tolerance: float = DEFAULT_TOLERANCE,
    mode: str = "ALL",
    noise_seed: int = 0,
    fd_step: float = DEFAULT_FD_STEP,
    max_entries: int = MAX_ENTRIES_PER_TENSOR,
    grad_scale: dict[str, float] | None = None,
) -> GradCheckReport:
    """Check every trainable parameter group of the full model against
    finite differences of the total loss, with fixed noise draws.
    """
    was_training = model.training
    model.eval()  # dropout off; losses are still the training objective

    def loss_fn() -> torch.Tensor:
        gen = torch.Generator().manual_seed(noise_seed)
        total, _, _ = model.compute_loss(batch, generator=gen, sample=True, mode=mode)
        return total

    report = check_gradients(
        loss_fn,
        [(n, p) for n, p in model.named_parameters() if p.requires_grad],
        tolerance=tolerance,
        fd_step=fd_step,
        max_entries=max_entries,
        grad_scale=grad_scale,
    )
    if was_training:
        model.train()
    return report
