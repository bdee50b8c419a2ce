"""Head-based source coding: keep the words that carry the prompt's syntax.

Head words (nouns, main verbs, adjectives, plus numerals and negations) are
identified either by a bundled rule-based tagger or by an external dependency
parser over HTTP. Pruning the rest, while preserving appearance order, gives
the word and character compression ratios reported per prompt.

The rule-based identifier is intentionally lexical: a closed-class function
word list plus an -ly adverb suffix rule. That makes head sets deterministic
and reproducible offline; known mis-taggings ("dogs like water" drops "like")
are accepted and pinned by golden tests.
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass
from fractions import Fraction
from importlib import resources
from typing import Protocol, Sequence

import numpy as np
import requests

from .text_model import Prompt


class EmptySelectionError(ValueError):
    """Every word was pruned; transmitting nothing is not part of the protocol."""


class ParserUnavailableError(RuntimeError):
    """External dependency-parse service could not be reached."""


class HeadSource(enum.Enum):
    RULE_BASED = "rule_based"
    EXTERNAL_PARSER = "external_parser"
    MANUAL = "manual"


@dataclass(frozen=True)
class HeadSelection:
    """Subset of a prompt's word indices marked as heads, in appearance order."""

    prompt: Prompt
    head_indices: tuple[int, ...]
    source: HeadSource

    def __post_init__(self):
        if not self.head_indices:
            raise EmptySelectionError("head selection is empty")
        n = len(self.prompt.words)
        if list(self.head_indices) != sorted(set(self.head_indices)):
            raise ValueError("head indices must be strictly ascending")
        if self.head_indices[0] < 0 or self.head_indices[-1] >= n:
            raise ValueError("head index out of range")

    @property
    def head_words(self) -> tuple[str, ...]:
        return tuple(self.prompt.words[i].text for i in self.head_indices)


@dataclass(frozen=True)
class CompressionReport:
    """Exact word and character ratios of a head selection.

    word_ratio = |heads| / |words|;
    char_ratio = head characters / word characters (separators excluded).
    """

    word_ratio: Fraction
    char_ratio: Fraction

    def __post_init__(self):
        for r in (self.word_ratio, self.char_ratio):
            if not 0 < r <= 1:
                raise ValueError("ratios must lie in (0, 1]")


class HeadIdentifier(Protocol):
    source: HeadSource

    def head_indices(self, prompt: Prompt) -> Sequence[int]: ...


def _load_lexicon() -> dict:
    text = resources.files("semcom.data").joinpath("pos_lexicon.json").read_text()
    return json.loads(text)


class RuleBasedIdentifier:
    """Offline head identifier: function-word stop list + -ly adverb rule.

    Kept: nouns, verbs, adjectives, numerals and negations (everything not in
    the closed-class lexicon). Dropped: determiners, auxiliaries, prepositions,
    conjunctions, pronouns, listed adverbs, and -ly adverbs not in the
    adjective exception list. Matching is case-insensitive; head order follows
    appearance.
    """

    source = HeadSource.RULE_BASED

    def __init__(self):
        lex = _load_lexicon()
        keep = set(lex["negations_kept"])
        drop: set[str] = set()
        for cls in ("determiners", "prepositions", "conjunctions", "pronouns",
                    "auxiliaries", "adverbs"):
            drop.update(lex[cls])
        self._drop = drop - keep
        self._ly_keep = set(lex["ly_adjectives_kept"])

    def _is_function_word(self, text: str) -> bool:
        w = text.lower()
        if w in self._drop:
            return True
        if w.endswith("ly") and len(w) >= 5 and w.isalpha() and w not in self._ly_keep:
            return True
        return False

    def head_indices(self, prompt: Prompt) -> list[int]:
        return [w.index for w in prompt.words if not self._is_function_word(w.text)]


class ExternalParserIdentifier:
    """Client for a dependency-parse HTTP service.

    Wire format: request body {"text": ...}; response body is line-delimited
    JSON whose object carries {"tokens": [{"word", "pos", "head"}, ...]} with
    "head" the 1-based index of the token's parent (0 for the root). A prompt
    word is a head when its token heads at least one dependency arc (or is the
    root) and is not a closed-class function word.
    """

    source = HeadSource.EXTERNAL_PARSER
    _CONTENT_POS_PREFIXES = ("N", "V", "J", "CD")

    def __init__(self, endpoint: str, timeout: float = 10.0):
        self.endpoint = endpoint
        self.timeout = timeout
        self._rules = RuleBasedIdentifier()

    def _fetch_tokens(self, text: str) -> list[dict]:
        try:
            resp = requests.post(self.endpoint, json={"text": text}, timeout=self.timeout)
            resp.raise_for_status()
        except requests.RequestException as e:
            raise ParserUnavailableError(f"parser at {self.endpoint} unavailable: {e}") from e
        for line in resp.text.splitlines():
            line = line.strip()
            if not line:
                continue
            obj = json.loads(line)
            if "tokens" in obj:
                return obj["tokens"]
        raise ParserUnavailableError(f"parser at {self.endpoint} returned no token payload")

    def head_indices(self, prompt: Prompt) -> list[int]:
        tokens = self._fetch_tokens(prompt.source_text)
        parents = {t["head"] for t in tokens if t.get("head", 0) > 0}
        arc_heads: set[int] = set()
        for pos_1based, tok in enumerate(tokens, start=1):
            is_root = tok.get("head", -1) == 0
            if pos_1based not in parents and not is_root:
                continue
            pos_tag = str(tok.get("pos", ""))
            if not pos_tag.startswith(self._CONTENT_POS_PREFIXES):
                continue
            if self._rules._is_function_word(str(tok["word"])):
                continue
            arc_heads.add(pos_1based)
        # align parser tokens with prompt words by running text match
        indices: list[int] = []
        cursor = 0
        words = prompt.words
        for pos_1based, tok in enumerate(tokens, start=1):
            word = str(tok["word"])
            for j in range(cursor, len(words)):
                if words[j].text == word:
                    if pos_1based in arc_heads:
                        indices.append(j)
                    cursor = j + 1
                    break
        return indices


class ManualIdentifier:
    """Fixed index selection, mainly for tests and forced baselines."""

    source = HeadSource.MANUAL

    def __init__(self, indices: Sequence[int]):
        self._indices = list(indices)

    def head_indices(self, prompt: Prompt) -> list[int]:
        return list(self._indices)


def identify_heads(prompt: Prompt, identifier: HeadIdentifier) -> HeadSelection:
    """Run the identifier and wrap the result; raises EmptySelectionError
    when every word would be pruned."""
    indices = sorted(set(identifier.head_indices(prompt)))
    if not indices:
        raise EmptySelectionError(
            f"no head word found in {prompt.source_text!r}")
    return HeadSelection(prompt=prompt, head_indices=tuple(indices), source=identifier.source)


def compress(selection: HeadSelection) -> tuple[Prompt, CompressionReport]:
    """Prune non-head words, keeping appearance order.

    Returns the compressed prompt (heads joined by single spaces) and the
    exact compression ratios.
    """
    prompt = selection.prompt
    heads = selection.head_words
    compressed = Prompt.from_words(heads)
    head_chars = sum(len(t) for t in heads)
    report = CompressionReport(
        word_ratio=Fraction(len(heads), len(prompt.words)),
        char_ratio=Fraction(head_chars, prompt.total_chars),
    )
    return compressed, report


class ShuffleMode(enum.Enum):
    RANDOM_WORDS = "random_words"
    RANDOM_ORDER = "random_order"


def shuffle_baseline(selection: HeadSelection, seed: int, mode: ShuffleMode) -> Prompt:
    """Ablation baselines for head selection and for appearance order.

    RANDOM_WORDS keeps appearance order but replaces the head set with |H|
    uniformly sampled distinct words from the full prompt; RANDOM_ORDER keeps
    the head words but applies a seeded uniform permutation. Deterministic
    given the seed (PCG64).
    """
    rng = np.random.Generator(np.random.PCG64(seed))
    prompt = selection.prompt
    k = len(selection.head_indices)
    if mode is ShuffleMode.RANDOM_WORDS:
        picked = sorted(rng.choice(len(prompt.words), size=k, replace=False).tolist())
        return Prompt.from_words([prompt.words[i].text for i in picked])
    heads = list(selection.head_words)
    perm = rng.permutation(k).tolist()
    return Prompt.from_words([heads[i] for i in perm])
