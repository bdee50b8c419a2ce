"""Synonym channel coding: trade characters for robustness.

Each head word is offered to a synonym oracle together with its masked
context. Candidates are admitted when their score clears the probability
threshold, then restricted to lengths in [len(word), len(word) + cap]. The
longest admissible synonym is chosen (ties: higher probability, then
lexicographically smaller); with no admissible candidate the word passes
through unchanged.

The oracle is pluggable: a static JSON dictionary for offline, deterministic
runs, or a chat-completion endpoint whose self-reported confidences stand in
for unmasking probabilities (decoder-only APIs do not expose them directly).

``survival_decode`` is the measurement counterpart: it maps a corrupted word
to the nearest vocabulary word by edit distance, so recovery rates quantify
how much protection the extra characters actually buy.
"""

from __future__ import annotations

import enum
import json
import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Protocol, Sequence

from .llm_client import ChatCompletionClient, LlmUnavailableError, load_template
from .text_model import Prompt, Word

MASK_TOKEN = "_"


class OracleUnavailableError(RuntimeError):
    """Synonym oracle could not be queried and no fallback is configured."""


class OracleKind(enum.Enum):
    LLM_CLIENT = "llm"
    STATIC_DICTIONARY = "static"


@dataclass(frozen=True)
class SynonymCandidate:
    """One candidate with its (clamped) unmasking score."""

    text: str
    probability: float

    def __post_init__(self):
        if not self.text or not self.text.isascii():
            raise ValueError(f"candidate text must be non-empty ASCII, got {self.text!r}")
        if not 0.0 <= self.probability <= 1.0:
            raise ValueError("probability must be in [0, 1]")


@dataclass(frozen=True)
class SccConfig:
    p_c: float = 0.72
    expansion_cap: int = 4
    oracle: OracleKind = OracleKind.STATIC_DICTIONARY

    def __post_init__(self):
        if not 0.0 < self.p_c <= 1.0:
            raise ValueError("p_c must be in (0, 1]")
        if self.expansion_cap < 0:
            raise ValueError("expansion_cap must be >= 0")


@dataclass(frozen=True)
class SccEncoding:
    """Outcome of encoding one head word.

    candidates: everything the oracle returned (deduplicated);
    admitted: candidates at or above the probability threshold (plus the
    identity fallback when nothing else is eligible);
    levels: admissible character counts within the expansion window;
    chosen: the transmitted synonym.
    """

    head_word: Word
    candidates: tuple[SynonymCandidate, ...]
    admitted: tuple[SynonymCandidate, ...]
    levels: frozenset[int]
    chosen: SynonymCandidate
    is_identity: bool

    @property
    def expansion(self) -> int:
        return len(self.chosen.text) - len(self.head_word.text)


class SynonymOracle(Protocol):
    def candidates(self, masked_prompt: str, word: str) -> Sequence[SynonymCandidate]: ...


class StaticDictionary:
    """Offline oracle backed by a JSON map word -> [{"synonym", "p"}].

    Lookup tries the exact word, then its lowercase form. Malformed entries
    are skipped, scores clamped to [0, 1]. Context is ignored by design.
    """

    def __init__(self, mapping: dict[str, list[dict]]):
        self._mapping = mapping

    @classmethod
    def from_file(cls, path: str | Path) -> "StaticDictionary":
        return cls(json.loads(Path(path).read_text()))

    @classmethod
    def bundled(cls) -> "StaticDictionary":
        text = resources.files("semcom.data").joinpath("synonyms.json").read_text()
        return cls(json.loads(text))

    def candidates(self, masked_prompt: str, word: str) -> list[SynonymCandidate]:
        entries = self._mapping.get(word)
        if entries is None:
            entries = self._mapping.get(word.lower(), [])
        out = []
        for e in entries:
            try:
                p = min(1.0, max(0.0, float(e["p"])))
                out.append(SynonymCandidate(text=str(e["synonym"]), probability=p))
            except (KeyError, TypeError, ValueError):
                continue
        return out


class LlmSynonymOracle:
    """Oracle backed by a chat endpoint; template is a versioned asset.

    The model is asked for a JSON object with synonym/confidence pairs; the
    confidences proxy the unmasking probability. Malformed items are skipped,
    never fatal; a dead endpoint raises OracleUnavailableError.
    """

    TEMPLATE_ID = "scc_synonyms_v1"

    def __init__(self, client: ChatCompletionClient):
        self.client = client
        self._template = load_template(self.TEMPLATE_ID)

    def candidates(self, masked_prompt: str, word: str) -> list[SynonymCandidate]:
        prompt = self._template.format(masked_prompt=masked_prompt, word=word)
        try:
            reply = self.client.complete([{"role": "user", "content": prompt}])
        except LlmUnavailableError as e:
            raise OracleUnavailableError(str(e)) from e
        return _parse_synonym_reply(reply)


def _parse_synonym_reply(reply: str) -> list[SynonymCandidate]:
    match = re.search(r"\{.*\}", reply, flags=re.S)
    if not match:
        return []
    try:
        obj = json.loads(match.group(0))
    except json.JSONDecodeError:
        return []
    out = []
    for item in obj.get("synonyms", []):
        try:
            text = str(item["synonym"]).strip()
            p = min(1.0, max(0.0, float(item["p"])))
            if text and text.isascii() and " " not in text:
                out.append(SynonymCandidate(text=text, probability=p))
        except (KeyError, TypeError, ValueError):
            continue
    return out


def _dedup(candidates: Sequence[SynonymCandidate]) -> list[SynonymCandidate]:
    best: dict[str, SynonymCandidate] = {}
    for c in candidates:
        prev = best.get(c.text)
        if prev is None or c.probability > prev.probability:
            best[c.text] = c
    return [best[t] for t in sorted(best)]


def encode_word(word: Word, context: Prompt, cfg: SccConfig,
                oracle: SynonymOracle) -> SccEncoding:
    """Encode one word of ``context`` against its masked surroundings.

    The chosen synonym is the longest admitted candidate within the expansion
    window; ties break toward higher probability, then lexicographic order.
    Falls back to the word itself (probability 1) when nothing qualifies.
    """
    if word.index >= len(context.words) or context.words[word.index].text != word.text:
        raise ValueError(f"word {word.text!r} does not occur in context at index {word.index}")
    masked_texts = list(context.word_texts)
    masked_texts[word.index] = MASK_TOKEN
    masked = context.with_words(masked_texts).source_text

    candidates = tuple(_dedup(oracle.candidates(masked, word.text)))
    admitted = tuple(c for c in candidates if c.probability >= cfg.p_c)
    low, high = len(word.text), len(word.text) + cfg.expansion_cap
    eligible = [c for c in admitted if low <= len(c.text) <= high]
    if eligible:
        chosen = sorted(eligible, key=lambda c: (-len(c.text), -c.probability, c.text))[0]
        levels = frozenset(len(c.text) for c in eligible)
        return SccEncoding(head_word=word, candidates=candidates, admitted=admitted,
                           levels=levels, chosen=chosen,
                           is_identity=chosen.text == word.text)
    identity = SynonymCandidate(text=word.text, probability=1.0)
    return SccEncoding(head_word=word, candidates=candidates,
                       admitted=admitted + (identity,),
                       levels=frozenset({len(word.text)}), chosen=identity,
                       is_identity=True)


def encode_prompt(compressed: Prompt, cfg: SccConfig, oracle: SynonymOracle,
                  max_workers: int = 1) -> tuple[Prompt, list[SccEncoding]]:
    """Word-wise encoding of a compressed prompt, order preserved.

    With ``max_workers`` > 1 the oracle is queried concurrently; results are
    still assembled in word order.
    """
    words = compressed.words
    if max_workers > 1:
        with ThreadPoolExecutor(max_workers=max_workers) as pool:
            encodings = list(pool.map(
                lambda w: encode_word(w, compressed, cfg, oracle), words))
    else:
        encodings = [encode_word(w, compressed, cfg, oracle) for w in words]
    encoded = compressed.with_words([e.chosen.text for e in encodings])
    return encoded, encodings


def levenshtein(a: str, b: str) -> int:
    """Plain edit distance (insert/delete/substitute, unit costs)."""
    if a == b:
        return 0
    if not a:
        return len(b)
    if not b:
        return len(a)
    if len(a) < len(b):
        a, b = b, a
    prev = list(range(len(b) + 1))
    for i, ca in enumerate(a, 1):
        cur = [i]
        append = cur.append
        for j, cb in enumerate(b, 1):
            append(min(prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (ca != cb)))
        prev = cur
    return prev[-1]


def survival_decode(received_word: str, vocabulary: Sequence[str]) -> tuple[str, int]:
    """Nearest-vocabulary correction of a received word.

    Returns the vocabulary word at minimum edit distance and that distance;
    ties break toward the shorter word, then lexicographically. The length
    difference bound is used to skip candidates that cannot win.
    """
    if not vocabulary:
        raise ValueError("vocabulary must be non-empty")
    best: tuple[int, int, str] | None = None
    for w in vocabulary:
        bound = abs(len(w) - len(received_word))
        if best is not None and bound > best[0]:
            continue
        d = levenshtein(received_word, w)
        key = (d, len(w), w)
        if best is None or key < best:
            best = key
    return best[2], best[0]
