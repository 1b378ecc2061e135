import pytest
import torch

from molmodal.featurize import collate, featurize_dataset
from molmodal.model import ModelConfig, MultiModalModel
from molmodal.synth import make_disentangle_dataset


@pytest.fixture(scope="session")
def tiny_dataset():
    return featurize_dataset(make_disentangle_dataset(n=12, seed=0))


@pytest.fixture()
def tiny_model(tiny_dataset):
    torch.manual_seed(0)
    cfg = ModelConfig(
        vocab_size=tiny_dataset.vocab_size,
        n_tasks=1,
        task_type="classification",
        hidden_dim=8,
        d_shared=4,
        d_private=4,
        dropout=0.0,
    )
    return MultiModalModel(cfg)


@pytest.fixture()
def tiny_batch(tiny_dataset):
    return collate(tiny_dataset.molecules[:4], pad_id=tiny_dataset.vocab_size)
