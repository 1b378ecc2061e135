"""SMILES tokenizer and vocabulary.

Tokens are lexed longest-match first: bracket atoms ``[...]`` and ``%nn``
ring labels are single tokens, two-letter elements (Cl, Br, Si, Se, As, Te)
beat their one-letter prefixes, everything else is a single character.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

from ..errors import MalformedSmiles, VocabError

TWO_LETTER_ELEMENTS = ("Cl", "Br", "Si", "Se", "As", "Te")

_TOKEN_RE = re.compile(
    r"(\[[^\[\]]*\]"
    r"|%\d{2}"
    r"|" + "|".join(TWO_LETTER_ELEMENTS) + r""
    r"|[BCNOPSFIHbcnops]"
    r"|[0-9]"
    r"|[-=#$:/\\().+*@])"
)


class Vocabulary:
    """Bidirectional token-string <-> integer-id map.

    Grows on :meth:`add` until frozen; a frozen vocabulary raises
    :class:`VocabError` on unknown tokens.
    """

    def __init__(self, tokens: list[str] | None = None):
        self._token_to_id: dict[str, int] = {}
        self._id_to_token: list[str] = []
        self.frozen = False
        for t in tokens or []:
            self.add(t)

    def __len__(self) -> int:
        return len(self._id_to_token)

    def add(self, token: str) -> int:
        if token in self._token_to_id:
            return self._token_to_id[token]
        if self.frozen:
            raise VocabError(f"unknown token {token!r} in frozen vocabulary")
        idx = len(self._id_to_token)
        self._token_to_id[token] = idx
        self._id_to_token.append(token)
        return idx

    def freeze(self) -> "Vocabulary":
        self.frozen = True
        return self

    def id_of(self, token: str) -> int:
        try:
            return self._token_to_id[token]
        except KeyError:
            raise VocabError(f"unknown token {token!r}") from None

    def token_of(self, idx: int) -> str:
        if not 0 <= idx < len(self._id_to_token):
            raise VocabError(f"token id {idx} out of range")
        return self._id_to_token[idx]

    def to_list(self) -> list[str]:
        return list(self._id_to_token)


@dataclass(frozen=True)
class TokenSequence:
    """Lexed SMILES: parallel lists of token ids and raw token strings."""

    tokens: tuple[int, ...]
    raw_tokens: tuple[str, ...]
    length: int = field(default=0)

    def __post_init__(self):
        object.__setattr__(self, "length", len(self.raw_tokens))

    def detokenize(self) -> str:
        return "".join(self.raw_tokens)


def lex_smiles(smiles: str) -> list[str]:
    """Split a SMILES string into raw token strings.

    Raises MalformedSmiles on illegal characters or unbalanced brackets.
    """
    if not smiles:
        raise MalformedSmiles("empty SMILES")
    if not smiles.isascii():
        raise MalformedSmiles("SMILES must be ASCII")
    if smiles.count("[") != smiles.count("]"):
        raise MalformedSmiles(f"unbalanced brackets in {smiles!r}")
    out: list[str] = []
    pos = 0
    while pos < len(smiles):
        m = _TOKEN_RE.match(smiles, pos)
        if m is None:
            raise MalformedSmiles(f"illegal character {smiles[pos]!r} at position {pos} in {smiles!r}")
        out.append(m.group(0))
        pos = m.end()
    return out


def tokenize_smiles(smiles: str, vocab: Vocabulary | None = None) -> TokenSequence:
    """Tokenize a SMILES string into a TokenSequence.

    If ``vocab`` is given, ids come from it (growing it unless frozen);
    otherwise a throwaway local vocabulary is used.
    """
    raw = lex_smiles(smiles)
    if vocab is None:
        vocab = Vocabulary()
    ids = tuple(vocab.add(t) if not vocab.frozen else vocab.id_of(t) for t in raw)
    return TokenSequence(tokens=ids, raw_tokens=tuple(raw))
