"""Canonical text representation shared by every pipeline stage.

Text is normalized to 7-bit ASCII, split into whitespace-delimited words
with leading/trailing punctuation detached into separators, and kept in an
immutable ``Prompt`` that round-trips losslessly back to the normalized
source string. Character counts are always over word characters only;
separators are never transmitted and never counted.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence


class EmptyTextError(ValueError):
    """Raised when a text contains no word after tokenization."""


class NonAsciiCharacterError(ValueError):
    """Raised for characters with no unambiguous ASCII equivalent.

    ``offset`` is the index of the offending character in the input string.
    """

    def __init__(self, char: str, offset: int):
        self.char = char
        self.offset = offset
        super().__init__(f"character {char!r} at offset {offset} has no ASCII mapping")


# Unicode punctuation folded to ASCII where the mapping is unambiguous.
# Anything else >= U+0080 is an error, never silently dropped.
_FOLD_MAP = {
    "‘": "'",   # left single quote
    "’": "'",   # right single quote / apostrophe
    "‚": "'",
    "“": '"',   # left double quote
    "”": '"',   # right double quote
    "„": '"',
    "–": "-",   # en dash
    "—": "-",   # em dash
    "―": "-",
    "−": "-",   # minus sign
    "…": "...",
    " ": " ",   # no-break space
    " ": " ",
    " ": " ",
    " ": " ",
    " ": " ",
    "´": "'",
    "ʼ": "'",
}

# Punctuation detached from word edges and kept as separator text. Word-internal
# apostrophes and hyphens stay put ("don't", "blue-green").
_EDGE_PUNCT = set(".,!?;:\"'()[]{}<>*/\\|~`")

_WHITESPACE = set(" \t\n\r\v\f")


def normalize(text: str) -> str:
    """Fold foldable Unicode punctuation to ASCII and reject the rest.

    Returns a string whose codepoints are all < 128. Raises
    NonAsciiCharacterError (with the original offset) for any character that
    has neither an ASCII codepoint nor an entry in the fold table.
    """
    out: list[str] = []
    for i, ch in enumerate(text):
        if ord(ch) < 128:
            out.append(ch)
            continue
        folded = _FOLD_MAP.get(ch)
        if folded is None:
            raise NonAsciiCharacterError(ch, i)
        out.append(folded)
    return "".join(out)


@dataclass(frozen=True)
class Word:
    """One word of a prompt. ``index`` is its 0-based position."""

    text: str
    index: int

    def __post_init__(self):
        if not self.text:
            raise ValueError("word text must be non-empty")
        if any(c in _WHITESPACE for c in self.text):
            raise ValueError(f"word text {self.text!r} contains whitespace")

    @property
    def char_count(self) -> int:
        return len(self.text)


@dataclass(frozen=True)
class Prompt:
    """An ordered word sequence plus the separator text between words.

    ``separators`` has one more entry than ``words``: separators[i] is the
    text before word i, separators[-1] the trailing text. Interleaving them
    reproduces ``source_text`` exactly.
    """

    words: tuple[Word, ...]
    source_text: str
    separators: tuple[str, ...] = field(repr=False)

    def __post_init__(self):
        if not self.words:
            raise EmptyTextError("prompt has no words")
        if len(self.separators) != len(self.words) + 1:
            raise ValueError("separator count must be word count + 1")
        for i, w in enumerate(self.words):
            if w.index != i:
                raise ValueError("word indices must be 0..n-1 in order")

    @property
    def word_texts(self) -> tuple[str, ...]:
        return tuple(w.text for w in self.words)

    @property
    def total_chars(self) -> int:
        """Character count over words only; separators excluded."""
        return sum(w.char_count for w in self.words)

    def with_words(self, new_texts: Sequence[str]) -> "Prompt":
        """Rebuild this prompt with substituted word texts, keeping separators."""
        if len(new_texts) != len(self.words):
            raise ValueError("substitution must keep the word count")
        words = tuple(Word(t, i) for i, t in enumerate(new_texts))
        parts: list[str] = []
        for sep, w in zip(self.separators, words):
            parts.append(sep)
            parts.append(w.text)
        parts.append(self.separators[-1])
        return Prompt(words=words, source_text="".join(parts), separators=self.separators)

    @classmethod
    def from_words(cls, texts: Iterable[str]) -> "Prompt":
        """Build a prompt from bare words joined by single spaces."""
        texts = list(texts)
        words = tuple(Word(t, i) for i, t in enumerate(texts))
        seps = ("",) + (" ",) * (len(texts) - 1) + ("",)
        return cls(words=words, source_text=" ".join(texts), separators=seps)


def tokenize(text: str) -> Prompt:
    """Split normalized text into a Prompt.

    Words are whitespace-delimited tokens with punctuation stripped from both
    edges; the stripped punctuation and the whitespace become separators, so
    detokenize(tokenize(s)) == normalize(s). Raises EmptyTextError when no
    word survives.
    """
    norm = normalize(text)
    words: list[Word] = []
    separators: list[str] = []
    pending_sep: list[str] = []
    i, n = 0, len(norm)
    while i < n:
        if norm[i] in _WHITESPACE:
            pending_sep.append(norm[i])
            i += 1
            continue
        # token = maximal run of non-whitespace
        j = i
        while j < n and norm[j] not in _WHITESPACE:
            j += 1
        token = norm[i:j]
        # detach edge punctuation
        a, b = 0, len(token)
        while a < b and token[a] in _EDGE_PUNCT:
            a += 1
        while b > a and token[b - 1] in _EDGE_PUNCT:
            b -= 1
        if a == b:
            pending_sep.append(token)  # token was pure punctuation
        else:
            pending_sep.append(token[:a])
            separators.append("".join(pending_sep))
            words.append(Word(token[a:b], len(words)))
            pending_sep = [token[b:]]
        i = j
    if not words:
        raise EmptyTextError("no word remains after tokenization")
    separators.append("".join(pending_sep))
    return Prompt(words=tuple(words), source_text=norm, separators=tuple(separators))


def detokenize(prompt: Prompt) -> str:
    """Inverse of tokenize: interleave separators and words."""
    parts: list[str] = []
    for sep, w in zip(prompt.separators, prompt.words):
        parts.append(sep)
        parts.append(w.text)
    parts.append(prompt.separators[-1])
    return "".join(parts)


@dataclass(frozen=True)
class Alphabet:
    """The 128-symbol ASCII source alphabet, carried on the wire as 8 bits.

    Codes 128..255 are representable in a transmitted byte but are not valid
    source symbols; the channel maps them to a replacement character.
    """

    symbols: tuple[str, ...] = tuple(chr(c) for c in range(128))
    bits_per_char: int = 8

    @property
    def size(self) -> int:
        return len(self.symbols)


ASCII_ALPHABET = Alphabet()
