"""Deterministic word-level vocabulary with reserved special tokens.

Token ids 0..4 are always the five specials, in this order: slot separator,
object separator, EOS, PAD, UNK. Remaining ids follow first-occurrence
order over the corpus, so the same corpus always yields the same ids.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

__all__ = ["Vocabulary", "build_vocab", "EOS_TEXT", "PAD_TEXT", "UNK_TEXT"]

EOS_TEXT = "<EOS>"
PAD_TEXT = "<PAD>"
UNK_TEXT = "<UNK>"


@dataclass
class Vocabulary:
    id_to_token: list[str]
    token_to_id: dict[str, int] = field(repr=False)
    slot_sep: int = 0
    obj_sep: int = 1
    eos: int = 2
    pad: int = 3
    unk: int = 4

    def __len__(self) -> int:
        return len(self.id_to_token)

    @property
    def special_ids(self) -> tuple[int, int, int, int, int]:
        return (self.slot_sep, self.obj_sep, self.eos, self.pad, self.unk)

    def encode(self, text: str) -> list[int]:
        """Whitespace-split ``text``; unknown tokens map to UNK."""
        return [self.token_to_id.get(tok, self.unk) for tok in text.split()]

    def decode(self, ids: list[int]) -> str:
        """Space-join the tokens for ``ids``; raises on out-of-range ids."""
        out = []
        for i in ids:
            if not 0 <= i < len(self.id_to_token):
                raise ValueError(f"token id {i} out of range for vocabulary of size {len(self)}")
            out.append(self.id_to_token[i])
        return " ".join(out)

    def save(self, path: str | Path) -> None:
        Path(path).write_text("\n".join(self.id_to_token) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "Vocabulary":
        tokens = Path(path).read_text(encoding="utf-8").splitlines()
        if len(tokens) < 5:
            raise ValueError(f"vocabulary file {path} is missing the special tokens")
        return cls(id_to_token=tokens, token_to_id={t: i for i, t in enumerate(tokens)})


def build_vocab(
    corpus: list[str],
    extra: list[str] = (),
    slot_sep: str = "<;>",
    obj_sep: str = "</>",
) -> Vocabulary:
    """Build a vocabulary over all whitespace tokens of ``corpus`` + ``extra``.

    Specials come first (ids 0..4); the separator literals always map to
    their reserved ids even when they occur in the corpus.
    """
    if not corpus:
        raise ValueError("corpus must be non-empty")
    specials = [slot_sep, obj_sep, EOS_TEXT, PAD_TEXT, UNK_TEXT]
    if len(set(specials)) != 5:
        raise ValueError("special token literals must be pairwise distinct")
    id_to_token = list(specials)
    token_to_id = {t: i for i, t in enumerate(id_to_token)}
    for text in list(corpus) + list(extra):
        for tok in text.split():
            if tok not in token_to_id:
                token_to_id[tok] = len(id_to_token)
                id_to_token.append(tok)
    return Vocabulary(id_to_token=id_to_token, token_to_id=token_to_id)
