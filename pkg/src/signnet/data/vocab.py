from __future__ import annotations

from typing import Iterable, Sequence

PAD, BOS, EOS, UNK = "<pad>", "<bos>", "<eos>", "<unk>"
BLANK = "<blank>"
WORD_RESERVED = (PAD, BOS, EOS, UNK)
GLOSS_RESERVED = (BLANK,)


class Vocabulary:
    """Bidirectional token <-> id map with reserved ids at the front."""

    def __init__(self, tokens: Iterable[str], reserved: Sequence[str] = WORD_RESERVED):
        self.reserved = tuple(reserved)
        self.itos: list[str] = list(self.reserved)
        for tok in tokens:
            if tok in self.reserved:
                raise ValueError(f"token {tok!r} collides with a reserved symbol")
            if tok not in self.itos:
                self.itos.append(tok)
        self.stoi = {t: i for i, t in enumerate(self.itos)}
        if len(self.stoi) != len(self.itos):
            raise ValueError("duplicate tokens in vocabulary")

    @classmethod
    def build(cls, sequences: Iterable[Sequence[str]], reserved: Sequence[str] = WORD_RESERVED) -> Vocabulary:
        """Vocabulary over all tokens in ``sequences``, in sorted order."""
        seen = sorted({tok for seq in sequences for tok in seq})
        return cls(seen, reserved)

    @classmethod
    def from_list(cls, itos: Sequence[str], n_reserved: int) -> Vocabulary:
        return cls(itos[n_reserved:], itos[:n_reserved])

    def __len__(self) -> int:
        return len(self.itos)

    def __contains__(self, token: str) -> bool:
        return token in self.stoi

    def __eq__(self, other) -> bool:
        return isinstance(other, Vocabulary) and self.itos == other.itos

    def id(self, name: str) -> int:
        return self.stoi[name]

    @property
    def pad_id(self) -> int:
        return self.stoi[PAD]

    @property
    def bos_id(self) -> int:
        return self.stoi[BOS]

    @property
    def eos_id(self) -> int:
        return self.stoi[EOS]

    @property
    def unk_id(self) -> int | None:
        return self.stoi.get(UNK)

    @property
    def blank_id(self) -> int:
        return self.stoi[BLANK]

    def encode(self, tokens: Sequence[str], strict: bool = True) -> list[int]:
        """Map tokens to ids; unknown tokens raise, or map to UNK when
        ``strict`` is false and the vocabulary has one."""
        out = []
        for tok in tokens:
            idx = self.stoi.get(tok)
            if idx is None:
                if strict or self.unk_id is None:
                    raise KeyError(f"token {tok!r} not in vocabulary")
                idx = self.unk_id
            out.append(idx)
        return out

    def decode(self, ids: Iterable[int], skip_reserved: bool = True) -> list[str]:
        n = len(self.reserved)
        return [self.itos[i] for i in ids if not (skip_reserved and i < n)]

    def unknown(self, tokens: Sequence[str]) -> list[str]:
        return [t for t in tokens if t not in self.stoi]
