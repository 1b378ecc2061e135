from .tokenizer import TokenSequence, Vocabulary, lex_smiles, tokenize_smiles
from .graph import AtomFeature, BondFeature, MolecularGraph, parse_smiles
from .conformer import (
    Conformation,
    conformation_from_coords,
    embed_conformation,
    load_coordinates,
    save_coordinates,
)
from .dataset import Dataset, LabeledMolecule, Molecule, load_dataset, split_dataset

__all__ = [
    "TokenSequence", "Vocabulary", "lex_smiles", "tokenize_smiles",
    "AtomFeature", "BondFeature", "MolecularGraph", "parse_smiles",
    "Conformation", "conformation_from_coords", "embed_conformation",
    "load_coordinates", "save_coordinates",
    "Dataset", "LabeledMolecule", "Molecule", "load_dataset", "split_dataset",
]
