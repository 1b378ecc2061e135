"""CSV dataset loading with missing-label masks, and reproducible splits."""

from __future__ import annotations

import csv
import logging
import os
from dataclasses import dataclass, field

import numpy as np

from ..errors import DatasetError, MalformedSmiles, SplitError
from .conformer import Conformation, conformation_from_coords, embed_conformation, load_coordinates
from .graph import MolecularGraph, parse_smiles
from .tokenizer import TokenSequence, Vocabulary, tokenize_smiles

logger = logging.getLogger(__name__)

TASK_TYPES = ("classification", "regression")


@dataclass(frozen=True)
class Molecule:
    smiles: str
    sequence: TokenSequence
    graph: MolecularGraph
    conformation: Conformation


@dataclass(frozen=True)
class LabeledMolecule:
    molecule: Molecule
    labels: np.ndarray  # (n_tasks,) float64; masked entries hold NaN
    label_mask: np.ndarray  # (n_tasks,) bool


@dataclass
class Dataset:
    records: list[LabeledMolecule]
    task_type: str
    n_tasks: int
    name: str
    vocab: Vocabulary
    task_names: list[str] = field(default_factory=list)
    skipped: list[tuple[int, str, str]] = field(default_factory=list)  # (row, smiles, reason)

    def __len__(self) -> int:
        return len(self.records)


def _parse_label_cell(cell: str) -> tuple[float, bool]:
    cell = cell.strip() if cell is not None else ""
    if cell == "":
        return float("nan"), False
    return float(cell), True


def load_dataset(
    csv_path,
    task_type: str,
    smiles_column: str,
    coords_path=None,
    conformer_seed: int = 0,
    name: str | None = None,
) -> Dataset:
    """Load a MoleculeNet-style CSV into a Dataset.

    Every non-SMILES column is a task; empty cells are masked out.
    Rows whose SMILES fail to parse are skipped with a warning record.
    """
    if task_type not in TASK_TYPES:
        raise DatasetError(f"task_type must be one of {TASK_TYPES}, got {task_type!r}")
    if not os.path.exists(csv_path):
        raise DatasetError(f"dataset file not found: {csv_path}")

    coords_by_index = load_coordinates(coords_path) if coords_path else {}

    with open(csv_path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or smiles_column not in reader.fieldnames:
            raise DatasetError(f"smiles column {smiles_column!r} not in header of {csv_path}")
        task_names = [c for c in reader.fieldnames if c != smiles_column]
        if not task_names:
            raise DatasetError(f"no label columns in {csv_path}")

        vocab = Vocabulary()
        records: list[LabeledMolecule] = []
        skipped: list[tuple[int, str, str]] = []
        for row_idx, row in enumerate(reader):
            smiles = (row[smiles_column] or "").strip()
            try:
                seq = tokenize_smiles(smiles, vocab)
                graph = parse_smiles(smiles)
            except MalformedSmiles as exc:
                skipped.append((row_idx, smiles, str(exc)))
                logger.warning("skipping row %d (%r): %s", row_idx, smiles, exc)
                continue
            try:
                labels_and_masks = [_parse_label_cell(row[c]) for c in task_names]
            except ValueError as exc:
                skipped.append((row_idx, smiles, f"bad label: {exc}"))
                logger.warning("skipping row %d (%r): bad label (%s)", row_idx, smiles, exc)
                continue
            if row_idx in coords_by_index:
                coords = coords_by_index[row_idx]
                if coords.shape[0] != graph.n_atoms:
                    raise DatasetError(
                        f"coordinates for row {row_idx} have {coords.shape[0]} atoms, "
                        f"graph has {graph.n_atoms}"
                    )
                conf = conformation_from_coords(coords, source="loaded")
            else:
                conf = embed_conformation(graph, conformer_seed)
            labels = np.array([v for v, _ in labels_and_masks], dtype=np.float64)
            mask = np.array([m for _, m in labels_and_masks], dtype=bool)
            records.append(
                LabeledMolecule(
                    molecule=Molecule(smiles=smiles, sequence=seq, graph=graph, conformation=conf),
                    labels=labels,
                    label_mask=mask,
                )
            )

    if not records:
        raise DatasetError(f"zero parseable rows in {csv_path}")

    vocab.freeze()
    return Dataset(
        records=records,
        task_type=task_type,
        n_tasks=len(task_names),
        name=name or os.path.splitext(os.path.basename(str(csv_path)))[0],
        vocab=vocab,
        task_names=task_names,
        skipped=skipped,
    )


def split_dataset(
    ds: Dataset, ratios: tuple[float, float, float], seed: int
) -> tuple[Dataset, Dataset, Dataset]:
    """Random split with sizes floor(r1*N), floor(r2*N), remainder."""
    if any(r <= 0 for r in ratios):
        raise SplitError(f"ratios must be positive, got {ratios}")
    if abs(sum(ratios) - 1.0) > 1e-9:
        raise SplitError(f"ratios must sum to 1, got {ratios}")
    n = len(ds.records)
    n_train = int(ratios[0] * n)
    n_val = int(ratios[1] * n)
    n_test = n - n_train - n_val
    if min(n_train, n_val, n_test) < 1:
        raise SplitError(f"split of {n} records with ratios {ratios} leaves an empty partition")

    perm = np.random.default_rng(seed).permutation(n)
    chunks = (perm[:n_train], perm[n_train : n_train + n_val], perm[n_train + n_val :])

    def sub(idx, tag):
        return Dataset(
            records=[ds.records[i] for i in idx],
            task_type=ds.task_type,
            n_tasks=ds.n_tasks,
            name=f"{ds.name}/{tag}",
            vocab=ds.vocab,
            task_names=list(ds.task_names),
        )

    return sub(chunks[0], "train"), sub(chunks[1], "val"), sub(chunks[2], "test")
