"""3D conformations: deterministic distance-geometry fallback and file I/O.

The fallback is not a physical conformer generator; it is a reproducible
layout that places bonded atoms at unit distance so the geometry encoder
has meaningful distance/angle inputs.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import DatasetError
from .graph import MolecularGraph

N_REFINE_ITERS = 200
STEP_SIZE = 0.2


@dataclass(frozen=True)
class Conformation:
    coordinates: np.ndarray  # (n_atoms, 3) float64
    pairwise_distances: np.ndarray  # (n_atoms, n_atoms) float64
    source: str  # "loaded" or "fallback"

    @property
    def n_atoms(self) -> int:
        return self.coordinates.shape[0]


def _distances(coords: np.ndarray) -> np.ndarray:
    diff = coords[:, None, :] - coords[None, :, :]
    return np.sqrt((diff * diff).sum(-1))


def conformation_from_coords(coords: np.ndarray, source: str) -> Conformation:
    coords = np.asarray(coords, dtype=np.float64)
    if coords.ndim != 2 or coords.shape[1] != 3:
        raise DatasetError(f"coordinates must be (n, 3), got {coords.shape}")
    return Conformation(coordinates=coords, pairwise_distances=_distances(coords), source=source)


def embed_conformation(graph: MolecularGraph, seed: int) -> Conformation:
    """Deterministic fallback layout targeting unit length for bonded pairs.

    Stochastic start fixed by (seed, n_atoms), then N_REFINE_ITERS steps of
    gradient descent on sum over bonds of (d - 1)^2. Output is centered at
    the centroid, so a single atom sits at the origin.
    """
    n = graph.n_atoms
    rng = np.random.default_rng([int(seed) & 0xFFFFFFFF, n, graph.n_bonds])
    coords = rng.normal(0.0, 1.0, size=(n, 3))

    if graph.n_bonds > 0:
        pairs = np.array([(b.u, b.v) for b in graph.bonds], dtype=np.intp)
        degree = np.maximum(1, np.array([len(nb) for nb in graph.adjacency], dtype=np.float64))
        for _ in range(N_REFINE_ITERS):
            d = coords[pairs[:, 0]] - coords[pairs[:, 1]]
            dist = np.sqrt((d * d).sum(-1))
            dist = np.maximum(dist, 1e-8)
            # gradient of (dist - 1)^2 w.r.t. each endpoint
            g = (2.0 * (dist - 1.0) / dist)[:, None] * d
            grad = np.zeros_like(coords)
            np.add.at(grad, pairs[:, 0], g)
            np.add.at(grad, pairs[:, 1], -g)
            coords -= STEP_SIZE * grad / degree[:, None]

    coords -= coords.mean(axis=0, keepdims=True)
    return conformation_from_coords(coords, source="fallback")


def save_coordinates(path, coords_by_index: dict[int, np.ndarray]) -> None:
    """Write the documented plain-text coordinates file.

    Format: for each record, a header line ``# <row_index> <n_atoms>``
    followed by n_atoms lines of ``x y z`` (floats, whitespace-separated).
    """
    with open(path, "w", encoding="utf-8") as fh:
        for idx in sorted(coords_by_index):
            coords = np.asarray(coords_by_index[idx], dtype=np.float64)
            fh.write(f"# {idx} {coords.shape[0]}\n")
            for row in coords:
                fh.write(f"{float(row[0])!r} {float(row[1])!r} {float(row[2])!r}\n")


def load_coordinates(path) -> dict[int, np.ndarray]:
    """Read the plain-text coordinates file written by save_coordinates."""
    out: dict[int, np.ndarray] = {}
    with open(path, encoding="utf-8") as fh:
        lines = [ln.strip() for ln in fh if ln.strip()]
    i = 0
    while i < len(lines):
        if not lines[i].startswith("#"):
            raise DatasetError(f"coordinates file {path}: expected header at line {i + 1}")
        parts = lines[i].split()
        if len(parts) != 3:
            raise DatasetError(f"coordinates file {path}: bad header {lines[i]!r}")
        idx, n = int(parts[1]), int(parts[2])
        block = lines[i + 1 : i + 1 + n]
        if len(block) != n:
            raise DatasetError(f"coordinates file {path}: truncated record {idx}")
        out[idx] = np.array([[float(x) for x in ln.split()] for ln in block], dtype=np.float64)
        i += 1 + n
    return out
