"""Numeric featurization of parsed molecules and batch collation.

Graphs are batched as one disjoint union with per-atom molecule indices so
encoders can scatter-pool per molecule. All tensors are float64 to keep
finite-difference gradient checks and run-to-run reproducibility clean.
"""

from __future__ import annotations

import pickle
from dataclasses import dataclass

import numpy as np
import torch

from .chem.dataset import Dataset, LabeledMolecule
from .chem.graph import OTHER_ELEMENT_ID

N_ELEMENT_CLASSES = OTHER_ELEMENT_ID + 1
MAX_DEGREE = 6
CHARGE_RANGE = (-2, 2)
ATOM_FEAT_DIM = N_ELEMENT_CLASSES + (MAX_DEGREE + 1) + (CHARGE_RANGE[1] - CHARGE_RANGE[0] + 1) + 2
BOND_FEAT_DIM = 5  # order one-hot (single/double/triple/aromatic) + ring flag

N_RBF = 16
RBF_CENTERS = np.linspace(0.0, 4.0, N_RBF)
RBF_WIDTH = 0.5
N_ANGLE_BASIS = 8
ANGLE_CENTERS = np.linspace(-1.0, 1.0, N_ANGLE_BASIS)
ANGLE_WIDTH = 0.25

_BOND_ORDER_INDEX = {"single": 0, "double": 1, "triple": 2, "aromatic": 3}

CACHE_FORMAT_VERSION = 1


@dataclass(frozen=True)
class FeaturizedMolecule:
    token_ids: np.ndarray  # (T,) int64
    atom_feats: np.ndarray  # (n, ATOM_FEAT_DIM) f64
    edge_src: np.ndarray  # (2E,) int64, directed
    edge_dst: np.ndarray  # (2E,) int64
    rev_index: np.ndarray  # (2E,) int64, index of the reverse directed edge
    edge_feats: np.ndarray  # (2E, BOND_FEAT_DIM) f64
    geo_edge_feats: np.ndarray  # (2E, N_RBF) f64, RBF of bonded distance
    angle_feats: np.ndarray  # (n, N_ANGLE_BASIS) f64
    coords: np.ndarray  # (n, 3) f64
    labels: np.ndarray  # (n_tasks,) f64
    label_mask: np.ndarray  # (n_tasks,) bool

    @property
    def n_atoms(self) -> int:
        return self.atom_feats.shape[0]


def _atom_feature_vector(atom) -> np.ndarray:
    v = np.zeros(ATOM_FEAT_DIM, dtype=np.float64)
    v[atom.element_id] = 1.0
    off = N_ELEMENT_CLASSES
    v[off + min(atom.degree, MAX_DEGREE)] = 1.0
    off += MAX_DEGREE + 1
    charge = int(np.clip(atom.formal_charge, *CHARGE_RANGE))
    v[off + charge - CHARGE_RANGE[0]] = 1.0
    off += CHARGE_RANGE[1] - CHARGE_RANGE[0] + 1
    v[off] = float(atom.aromatic)
    v[off + 1] = float(atom.in_ring)
    return v


def rbf_expand(d: np.ndarray) -> np.ndarray:
    return np.exp(-((d[..., None] - RBF_CENTERS) ** 2) / (2.0 * RBF_WIDTH**2))


def angle_features(coords: np.ndarray, adjacency) -> np.ndarray:
    """Per-atom sum of Gaussian-basis expansions of bonded-pair angle cosines."""
    n = coords.shape[0]
    out = np.zeros((n, N_ANGLE_BASIS), dtype=np.float64)
    for v in range(n):
        nb = adjacency[v]
        for i in range(len(nb)):
            for j in range(i + 1, len(nb)):
                a = coords[nb[i]] - coords[v]
                b = coords[nb[j]] - coords[v]
                na, nb_ = np.linalg.norm(a), np.linalg.norm(b)
                if na < 1e-10 or nb_ < 1e-10:
                    continue
                cos = float(np.dot(a, b) / (na * nb_))
                out[v] += np.exp(-((cos - ANGLE_CENTERS) ** 2) / (2.0 * ANGLE_WIDTH**2))
    return out


def featurize_molecule(rec: LabeledMolecule) -> FeaturizedMolecule:
    mol = rec.molecule
    graph, conf = mol.graph, mol.conformation
    n = graph.n_atoms
    atom_feats = np.stack([_atom_feature_vector(a) for a in graph.atoms]) if n else np.zeros((0, ATOM_FEAT_DIM))

    src, dst, rev, efeats = [], [], [], []
    for b in graph.bonds:
        base = len(src)
        f = np.zeros(BOND_FEAT_DIM, dtype=np.float64)
        f[_BOND_ORDER_INDEX[b.order]] = 1.0
        f[4] = float(b.in_ring)
        src += [b.u, b.v]
        dst += [b.v, b.u]
        rev += [base + 1, base]
        efeats += [f, f]
    edge_src = np.array(src, dtype=np.int64)
    edge_dst = np.array(dst, dtype=np.int64)
    rev_index = np.array(rev, dtype=np.int64)
    edge_feats = np.stack(efeats) if efeats else np.zeros((0, BOND_FEAT_DIM))

    if len(src):
        dists = conf.pairwise_distances[edge_src, edge_dst]
        geo_edge_feats = rbf_expand(dists)
    else:
        geo_edge_feats = np.zeros((0, N_RBF))

    return FeaturizedMolecule(
        token_ids=np.array(mol.sequence.tokens, dtype=np.int64),
        atom_feats=atom_feats,
        edge_src=edge_src,
        edge_dst=edge_dst,
        rev_index=rev_index,
        edge_feats=edge_feats,
        geo_edge_feats=geo_edge_feats,
        angle_feats=angle_features(conf.coordinates, graph.adjacency),
        coords=np.asarray(conf.coordinates, dtype=np.float64),
        labels=np.asarray(rec.labels, dtype=np.float64),
        label_mask=np.asarray(rec.label_mask, dtype=bool),
    )


@dataclass
class FeaturizedDataset:
    molecules: list[FeaturizedMolecule]
    vocab_tokens: list[str]
    task_type: str
    n_tasks: int
    name: str

    def __len__(self) -> int:
        return len(self.molecules)

    @property
    def vocab_size(self) -> int:
        return len(self.vocab_tokens)


def featurize_dataset(ds: Dataset) -> FeaturizedDataset:
    return FeaturizedDataset(
        molecules=[featurize_molecule(r) for r in ds.records],
        vocab_tokens=ds.vocab.to_list(),
        task_type=ds.task_type,
        n_tasks=ds.n_tasks,
        name=ds.name,
    )


def save_cache(fds: FeaturizedDataset, path) -> None:
    payload = {
        "format_version": CACHE_FORMAT_VERSION,
        "vocab_tokens": fds.vocab_tokens,
        "task_type": fds.task_type,
        "n_tasks": fds.n_tasks,
        "name": fds.name,
        "molecules": [m.__dict__ for m in fds.molecules],
    }
    with open(path, "wb") as fh:
        pickle.dump(payload, fh, protocol=4)


def load_cache(path) -> FeaturizedDataset:
    with open(path, "rb") as fh:
        payload = pickle.load(fh)
    return FeaturizedDataset(
        molecules=[FeaturizedMolecule(**d) for d in payload["molecules"]],
        vocab_tokens=payload["vocab_tokens"],
        task_type=payload["task_type"],
        n_tasks=payload["n_tasks"],
        name=payload["name"],
    )


def split_featurized(
    fds: FeaturizedDataset, ratios: tuple[float, float, float], seed: int
) -> tuple["FeaturizedDataset", "FeaturizedDataset", "FeaturizedDataset"]:
    """Same permutation and floor/remainder rule as chem.split_dataset."""
    from .errors import SplitError

    if any(r <= 0 for r in ratios) or abs(sum(ratios) - 1.0) > 1e-9:
        raise SplitError(f"bad ratios {ratios}")
    n = len(fds)
    n_train = int(ratios[0] * n)
    n_val = int(ratios[1] * n)
    if min(n_train, n_val, n - n_train - n_val) < 1:
        raise SplitError(f"split of {n} records with ratios {ratios} leaves an empty partition")
    perm = np.random.default_rng(seed).permutation(n)

    def sub(idx, tag):
        return FeaturizedDataset(
            molecules=[fds.molecules[i] for i in idx],
            vocab_tokens=fds.vocab_tokens,
            task_type=fds.task_type,
            n_tasks=fds.n_tasks,
            name=f"{fds.name}/{tag}",
        )

    return (
        sub(perm[:n_train], "train"),
        sub(perm[n_train : n_train + n_val], "val"),
        sub(perm[n_train + n_val :], "test"),
    )


@dataclass
class Batch:
    """Collated minibatch of featurized molecules (disjoint-union graph)."""

    token_ids: torch.Tensor  # (B, Tmax) long, padded with pad_id
    token_mask: torch.Tensor  # (B, Tmax) bool, True on real tokens
    lengths: torch.Tensor  # (B,) long
    atom_feats: torch.Tensor  # (N, ATOM_FEAT_DIM)
    atom_mol: torch.Tensor  # (N,) long, molecule index per atom
    edge_src: torch.Tensor  # (E,) long, global atom indices
    edge_dst: torch.Tensor  # (E,) long
    rev_index: torch.Tensor  # (E,) long, global edge indices
    edge_feats: torch.Tensor  # (E, BOND_FEAT_DIM)
    geo_edge_feats: torch.Tensor  # (E, N_RBF)
    angle_feats: torch.Tensor  # (N, N_ANGLE_BASIS)
    labels: torch.Tensor  # (B, n_tasks)
    label_mask: torch.Tensor  # (B, n_tasks) bool
    n_molecules: int
    pad_id: int


def collate(mols: list[FeaturizedMolecule], pad_id: int) -> Batch:
    b = len(mols)
    lengths = [len(m.token_ids) for m in mols]
    tmax = max(lengths)
    tok = np.full((b, tmax), pad_id, dtype=np.int64)
    mask = np.zeros((b, tmax), dtype=bool)
    for i, m in enumerate(mols):
        tok[i, : lengths[i]] = m.token_ids
        mask[i, : lengths[i]] = True

    atom_offset = 0
    edge_offset = 0
    atom_mol, src, dst, rev = [], [], [], []
    for i, m in enumerate(mols):
        atom_mol.append(np.full(m.n_atoms, i, dtype=np.int64))
        src.append(m.edge_src + atom_offset)
        dst.append(m.edge_dst + atom_offset)
        rev.append(m.rev_index + edge_offset)
        atom_offset += m.n_atoms
        edge_offset += len(m.edge_src)

    def cat(arrs, width):
        if not arrs or sum(a.shape[0] for a in arrs) == 0:
            return np.zeros((0, width) if width else (0,), dtype=np.float64 if width else np.int64)
        return np.concatenate(arrs)

    return Batch(
        token_ids=torch.from_numpy(tok),
        token_mask=torch.from_numpy(mask),
        lengths=torch.tensor(lengths, dtype=torch.long),
        atom_feats=torch.from_numpy(np.concatenate([m.atom_feats for m in mols])),
        atom_mol=torch.from_numpy(np.concatenate(atom_mol)),
        edge_src=torch.from_numpy(cat(src, 0)),
        edge_dst=torch.from_numpy(cat(dst, 0)),
        rev_index=torch.from_numpy(cat(rev, 0)),
        edge_feats=torch.from_numpy(cat([m.edge_feats for m in mols], BOND_FEAT_DIM)),
        geo_edge_feats=torch.from_numpy(cat([m.geo_edge_feats for m in mols], N_RBF)),
        angle_feats=torch.from_numpy(np.concatenate([m.angle_feats for m in mols])),
        labels=torch.from_numpy(np.stack([m.labels for m in mols])),
        label_mask=torch.from_numpy(np.stack([m.label_mask for m in mols])),
        n_molecules=b,
        pad_id=pad_id,
    )
