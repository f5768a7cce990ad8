"""Character inventory and tokenization for the text-conditioning channel."""

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError

EXTENDED_CHARS = "äöüß"  # ä ö ü ß
_ASCII_LOWER = "abcdefghijklmnopqrstuvwxyz"
_REQUIRED = set(" 0123456789") | set(_ASCII_LOWER) | set(_ASCII_LOWER.upper()) | set(EXTENDED_CHARS)


class Vocabulary:
    """Ordered character list with a pad id one past the last character id."""

    def __init__(self, chars, max_len=32):
        chars = list(chars)
        if len(set(chars)) != len(chars):
            raise ConfigError("vocabulary characters must be unique")
        missing = _REQUIRED - set(chars)
        if missing:
            raise ConfigError(f"vocabulary missing required characters: {sorted(missing)}")
        if max_len < 1:
            raise ConfigError(f"max_len must be >= 1, got {max_len}")
        self.chars = chars
        self.max_len = max_len
        self.pad_id = len(chars)
        self._index = {c: i for i, c in enumerate(chars)}

    @classmethod
    def default(cls, max_len=32):
        return cls(" 0123456789" + _ASCII_LOWER.upper() + _ASCII_LOWER + EXTENDED_CHARS, max_len)

    @property
    def n_ids(self):
        """Id count including the pad id (embedding table size)."""
        return len(self.chars) + 1

    def char_id(self, ch):
        return self._index[ch]

    def __contains__(self, ch):
        return ch in self._index

    def to_dict(self):
        return {"chars": "".join(self.chars), "max_len": self.max_len}

    @classmethod
    def from_dict(cls, d):
        return cls(list(d["chars"]), d["max_len"])


@dataclass
class TokenSeq:
    """Fixed-length id sequence: ids beyond `length` hold the pad id."""

    ids: np.ndarray
    length: int


def tokenize(text, vocab):
    if len(text) > vocab.max_len:
        raise ValueError(f"text length {len(text)} exceeds max_len {vocab.max_len}")
    ids = np.full(vocab.max_len, vocab.pad_id, dtype=np.int64)
    for i, ch in enumerate(text):
        if ch not in vocab:
            raise ValueError(f"unknown character {ch!r} at index {i}")
        ids[i] = vocab.char_id(ch)
    return TokenSeq(ids=ids, length=len(text))


def detokenize(seq, vocab):
    ids = seq.ids[:seq.length] if isinstance(seq, TokenSeq) else np.asarray(seq)
    out = []
    for i in ids:
        i = int(i)
        if i == vocab.pad_id:
            break
        out.append(vocab.chars[i])
    return "".join(out)
