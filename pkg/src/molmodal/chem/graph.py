"""Molecular graph construction from SMILES token streams.

Heavy-atom graphs only: implicit hydrogens are not materialized. Stereo
markers (/, \\, @) are accepted by the lexer and ignored here.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

from ..errors import MalformedSmiles
from .tokenizer import lex_smiles

# Element symbols recognised for the one-hot id; anything else maps to "other".
ELEMENTS = [
    "H", "He", "Li", "Be", "B", "C", "N", "O", "F", "Ne",
    "Na", "Mg", "Al", "Si", "P", "S", "Cl", "Ar", "K", "Ca",
    "Sc", "Ti", "V", "Cr", "Mn", "Fe", "Co", "Ni", "Cu", "Zn",
    "Ga", "Ge", "As", "Se", "Br", "Kr", "Rb", "Sr", "Y", "Zr",
    "Nb", "Mo", "Tc", "Ru", "Rh", "Pd", "Ag", "Cd", "In", "Sn",
    "Sb", "Te", "I", "Xe", "Cs", "Ba", "La", "Ce", "Pr", "Nd",
    "Pm", "Sm", "Eu", "Gd", "Tb", "Dy", "Ho", "Er", "Tm", "Yb",
    "Lu", "Hf", "Ta", "W", "Re", "Os", "Ir", "Pt", "Au", "Hg",
    "Tl", "Pb", "Bi", "Po", "At", "Rn", "Fr", "Ra", "Ac", "Th",
    "Pa", "U", "Np", "Pu", "Am", "Cm", "Bk", "Cf", "Es", "Fm",
]
ELEMENT_IDS = {sym: i for i, sym in enumerate(ELEMENTS)}
OTHER_ELEMENT_ID = len(ELEMENTS)

BOND_ORDERS = ("single", "double", "triple", "aromatic")

_BRACKET_RE = re.compile(
    r"\[(?P<isotope>\d+)?(?P<symbol>[A-Za-z][a-z]?|\*)(?P<chiral>@{1,2})?"
    r"(?P<hcount>H\d*)?(?P<charge>\+{1,3}|-{1,3}|\+\d+|-\d+)?(?::\d+)?\]"
)

_BOND_TOKEN_ORDER = {"-": "single", "=": "double", "#": "triple", "$": "triple", ":": "aromatic"}


@dataclass(frozen=True)
class AtomFeature:
    element_id: int
    symbol: str
    degree: int
    formal_charge: int
    aromatic: bool
    in_ring: bool


@dataclass(frozen=True)
class BondFeature:
    u: int
    v: int
    order: str  # one of BOND_ORDERS
    in_ring: bool


@dataclass(frozen=True)
class MolecularGraph:
    atoms: tuple[AtomFeature, ...]
    bonds: tuple[BondFeature, ...]
    adjacency: tuple[tuple[int, ...], ...]

    @property
    def n_atoms(self) -> int:
        return len(self.atoms)

    @property
    def n_bonds(self) -> int:
        return len(self.bonds)


def _parse_bracket_atom(token: str) -> tuple[str, int, bool]:
    """Return (symbol, formal_charge, aromatic) for a bracket-atom token."""
    m = _BRACKET_RE.fullmatch(token)
    if m is None:
        raise MalformedSmiles(f"cannot parse bracket atom {token!r}")
    sym = m.group("symbol")
    aromatic = sym[0].islower() and sym != "*"
    charge_tok = m.group("charge")
    charge = 0
    if charge_tok:
        if charge_tok[1:].isdigit():
            charge = int(charge_tok[1:]) * (1 if charge_tok[0] == "+" else -1)
        else:
            charge = len(charge_tok) * (1 if charge_tok[0] == "+" else -1)
    return sym[0].upper() + sym[1:], charge, aromatic


def _is_atom_token(token: str) -> bool:
    return token.startswith("[") or (token[0].isalpha() or token == "*")


def _ring_flags(n_atoms: int, bonds: list[tuple[int, int, str]]) -> tuple[set[int], set[int]]:
    """Bond indices and atom indices that lie on a cycle.

    A bond is in a ring iff it is not a bridge; detected by checking whether
    its endpoints stay connected when the bond is removed.
    """
    adj: list[set[int]] = [set() for _ in range(n_atoms)]
    for bi, (u, v, _) in enumerate(bonds):
        adj[u].add(bi)
        adj[v].add(bi)

    ring_bonds: set[int] = set()
    for bi, (u, v, _) in enumerate(bonds):
        # BFS from u to v avoiding bond bi
        seen = {u}
        stack = [u]
        found = False
        while stack and not found:
            a = stack.pop()
            for bj in adj[a]:
                if bj == bi:
                    continue
                x, y, _ = bonds[bj]
                b = y if x == a else x
                if b == v:
                    found = True
                    break
                if b not in seen:
                    seen.add(b)
                    stack.append(b)
        if found:
            ring_bonds.add(bi)
    ring_atoms = {a for bi in ring_bonds for a in bonds[bi][:2]}
    return ring_bonds, ring_atoms


def parse_smiles(smiles: str) -> MolecularGraph:
    """Parse a SMILES string into a heavy-atom MolecularGraph."""
    tokens = lex_smiles(smiles)

    symbols: list[str] = []
    charges: list[int] = []
    aromatic: list[bool] = []
    bonds: list[tuple[int, int, str]] = []
    bond_set: set[tuple[int, int]] = set()

    prev_atom: int | None = None
    pending_order: str | None = None
    branch_stack: list[int | None] = []
    open_rings: dict[str, tuple[int, str | None]] = {}

    def add_bond(u: int, v: int, order: str | None):
        if u == v:
            raise MalformedSmiles(f"self-loop bond on atom {u} in {smiles!r}")
        key = (min(u, v), max(u, v))
        if key in bond_set:
            raise MalformedSmiles(f"duplicate bond {key} in {smiles!r}")
        if order is None:
            order = "aromatic" if aromatic[u] and aromatic[v] else "single"
        bond_set.add(key)
        bonds.append((u, v, order))

    for tok in tokens:
        if tok in _BOND_TOKEN_ORDER:
            pending_order = _BOND_TOKEN_ORDER[tok]
        elif tok in ("/", "\\"):
            pass  # stereo bond markers ignored
        elif tok == "(":
            branch_stack.append(prev_atom)
        elif tok == ")":
            if not branch_stack:
                raise MalformedSmiles(f"unmatched ')' in {smiles!r}")
            prev_atom = branch_stack.pop()
        elif tok == ".":
            prev_atom = None
            pending_order = None
        elif tok.isdigit() or tok.startswith("%"):
            label = tok.lstrip("%")
            if prev_atom is None:
                raise MalformedSmiles(f"ring label {tok!r} without an atom in {smiles!r}")
            if label in open_rings:
                other, order_there = open_rings.pop(label)
                add_bond(other, prev_atom, pending_order or order_there)
            else:
                open_rings[label] = (prev_atom, pending_order)
            pending_order = None
        elif tok == "@":
            pass  # bare stereo marker (normally inside brackets)
        elif _is_atom_token(tok):
            if tok.startswith("["):
                sym, charge, arom = _parse_bracket_atom(tok)
            elif tok == "*":
                sym, charge, arom = "*", 0, False
            else:
                arom = tok[0].islower()
                sym = tok[0].upper() + tok[1:]
                charge = 0
            idx = len(symbols)
            symbols.append(sym)
            charges.append(charge)
            aromatic.append(arom)
            if prev_atom is not None:
                add_bond(prev_atom, idx, pending_order)
            pending_order = None
            prev_atom = idx
        else:
            raise MalformedSmiles(f"unexpected token {tok!r} in {smiles!r}")

    if branch_stack:
        raise MalformedSmiles(f"unclosed branch in {smiles!r}")
    if open_rings:
        raise MalformedSmiles(f"unclosed ring labels {sorted(open_rings)} in {smiles!r}")
    if not symbols:
        raise MalformedSmiles(f"no atoms in {smiles!r}")

    n = len(symbols)
    ring_bonds, ring_atoms = _ring_flags(n, bonds)

    adjacency: list[list[int]] = [[] for _ in range(n)]
    for u, v, _ in bonds:
        adjacency[u].append(v)
        adjacency[v].append(u)

    atoms = tuple(
        AtomFeature(
            element_id=ELEMENT_IDS.get(symbols[i], OTHER_ELEMENT_ID),
            symbol=symbols[i],
            degree=len(adjacency[i]),
            formal_charge=charges[i],
            aromatic=aromatic[i],
            in_ring=i in ring_atoms,
        )
        for i in range(n)
    )
    bond_feats = tuple(
        BondFeature(u=u, v=v, order=order, in_ring=bi in ring_bonds)
        for bi, (u, v, order) in enumerate(bonds)
    )
    return MolecularGraph(
        atoms=atoms,
        bonds=bond_feats,
        adjacency=tuple(tuple(nb) for nb in adjacency),
    )
