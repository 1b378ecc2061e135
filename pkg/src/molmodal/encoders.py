"""Modality encoders: token sequence, molecular graph, and 3D geometry.

All three map a collated Batch to a (B, hidden_dim) embedding matrix.
Pooling is mean-over-real-tokens for sequences and sum-over-atoms for the
two graph encoders; sum pooling keeps disconnected fragments additive at
the pre-projection level, which the tests rely on.
"""

from __future__ import annotations

from dataclasses import dataclass

import torch
from torch import nn
from torch.nn.utils.rnn import pack_padded_sequence, pad_packed_sequence

from .featurize import ATOM_FEAT_DIM, BOND_FEAT_DIM, N_ANGLE_BASIS, N_RBF, Batch

MODALITIES = ("sequence", "graph", "geometry")


@dataclass(frozen=True)
class ModalityEmbedding:
    vector: torch.Tensor
    modality: str


def scatter_sum(values: torch.Tensor, index: torch.Tensor, size: int) -> torch.Tensor:
    out = values.new_zeros((size,) + values.shape[1:])
    if values.shape[0]:
        out.index_add_(0, index, values)
    return out


class SequenceEncoder(nn.Module):
    """Bidirectional recurrent layer followed by a self-attention encoder.

    Padded positions are excluded from recurrence (packed sequences),
    attention (key padding mask), and pooling, so padding a batch entry
    cannot change its embedding.
    """

    def __init__(self, vocab_size: int, hidden_dim: int, n_heads: int = 2, n_layers: int = 2):
        super().__init__()
        if hidden_dim % 2:
            raise ValueError("hidden_dim must be even for the bidirectional split")
        self.vocab_size = vocab_size
        self.pad_id = vocab_size
        self.embedding = nn.Embedding(vocab_size + 1, hidden_dim, padding_idx=self.pad_id)
        self.lstm = nn.LSTM(hidden_dim, hidden_dim // 2, batch_first=True, bidirectional=True)
        layer = nn.TransformerEncoderLayer(
            d_model=hidden_dim,
            nhead=n_heads,
            dim_feedforward=2 * hidden_dim,
            dropout=0.0,
            activation="relu",
            batch_first=True,
        )
        # nested-tensor fast path disabled: it switches numerical kernels
        # between grad and no-grad evaluation, which breaks bit-level
        # reproducibility and finite-difference checks
        self.transformer = nn.TransformerEncoder(layer, num_layers=n_layers, enable_nested_tensor=False)

    def forward(self, batch: Batch) -> torch.Tensor:
        if (batch.token_ids[batch.token_mask] >= self.vocab_size).any():
            from .errors import VocabError

            raise VocabError("token id outside vocabulary")
        emb = self.embedding(batch.token_ids)
        packed = pack_padded_sequence(
            emb, batch.lengths.cpu(), batch_first=True, enforce_sorted=False
        )
        out, _ = self.lstm(packed)
        h, _ = pad_packed_sequence(out, batch_first=True, total_length=batch.token_ids.shape[1])
        h = self.transformer(h, src_key_padding_mask=~batch.token_mask)
        mask = batch.token_mask.unsqueeze(-1).to(h.dtype)
        return (h * mask).sum(dim=1) / mask.sum(dim=1)


class GraphEncoder(nn.Module):
    """Message passing with communicating node and directed-edge states.

    Each round: nodes aggregate incoming directed-edge states by sum, then
    each directed edge u->v is refreshed from the updated source node and
    the incoming sum at u minus the reverse edge v->u (no message echo).
    """

    def __init__(self, hidden_dim: int, n_steps: int = 3):
        super().__init__()
        self.n_steps = n_steps
        self.node_init = nn.Linear(ATOM_FEAT_DIM, hidden_dim)
        self.edge_init = nn.Linear(ATOM_FEAT_DIM + BOND_FEAT_DIM, hidden_dim)
        self.communicate = nn.Linear(2 * hidden_dim, hidden_dim)
        self.edge_update = nn.Linear(2 * hidden_dim, hidden_dim)
        self.project = nn.Linear(hidden_dim, hidden_dim)

    def node_states(self, batch: Batch) -> torch.Tensor:
        n_atoms = batch.atom_feats.shape[0]
        h = torch.relu(self.node_init(batch.atom_feats))
        if batch.edge_src.shape[0]:
            e = torch.relu(
                self.edge_init(torch.cat([batch.atom_feats[batch.edge_src], batch.edge_feats], dim=-1))
            )
        else:
            e = batch.atom_feats.new_zeros((0, h.shape[1]))
        for _ in range(self.n_steps):
            m = scatter_sum(e, batch.edge_dst, n_atoms)
            h = torch.relu(self.communicate(torch.cat([h, m], dim=-1)))
            if e.shape[0]:
                incoming_at_src = m[batch.edge_src] - e[batch.rev_index]
                e = torch.relu(
                    self.edge_update(torch.cat([h[batch.edge_src], incoming_at_src], dim=-1))
                )
        return h

    def pooled(self, batch: Batch) -> torch.Tensor:
        """Sum-pooled node states before the output projection."""
        return scatter_sum(self.node_states(batch), batch.atom_mol, batch.n_molecules)

    def forward(self, batch: Batch) -> torch.Tensor:
        return self.project(torch.relu(self.pooled(batch)))


class GeometryEncoder(nn.Module):
    """Message passing over bonded pairs with distance/angle features.

    Edge features are radial-basis expansions of pairwise distances and
    stay static across rounds; angle-cosine expansions enter as node
    features. Both depend only on rigid-motion invariants.
    """

    def __init__(self, hidden_dim: int, n_steps: int = 3):
        super().__init__()
        self.n_steps = n_steps
        self.node_init = nn.Linear(ATOM_FEAT_DIM + N_ANGLE_BASIS, hidden_dim)
        self.edge_embed = nn.Linear(N_RBF, hidden_dim)
        self.message = nn.Linear(2 * hidden_dim, hidden_dim)
        self.combine = nn.Linear(2 * hidden_dim, hidden_dim)
        self.project = nn.Linear(hidden_dim, hidden_dim)

    def node_states(self, batch: Batch) -> torch.Tensor:
        n_atoms = batch.atom_feats.shape[0]
        h = torch.relu(self.node_init(torch.cat([batch.atom_feats, batch.angle_feats], dim=-1)))
        e = torch.relu(self.edge_embed(batch.geo_edge_feats))
        for _ in range(self.n_steps):
            if e.shape[0]:
                msg = torch.relu(self.message(torch.cat([h[batch.edge_src], e], dim=-1)))
                m = scatter_sum(msg, batch.edge_dst, n_atoms)
            else:
                m = torch.zeros_like(h)
            h = torch.relu(self.combine(torch.cat([h, m], dim=-1)))
        return h

    def pooled(self, batch: Batch) -> torch.Tensor:
        return scatter_sum(self.node_states(batch), batch.atom_mol, batch.n_molecules)

    def forward(self, batch: Batch) -> torch.Tensor:
        return self.project(torch.relu(self.pooled(batch)))
