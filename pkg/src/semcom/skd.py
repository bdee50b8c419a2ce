"""Style translation via few-shot demonstration.

When sender and receiver describe images differently, the sender can rewrite
its caption into the receiver's style before compressing it. The translator
is learned in context from K demonstration pairs (same image captioned by
both sides), never by weight updates.

Two translators ship: a chat-endpoint client rendering a versioned few-shot
template, and an offline mock that learns a positional word-substitution
table from the demonstrations. The mock is deterministic, which is what the
test suite pins; endpoint output quality is logged, not asserted.

Translation happens before head-word compression, never after synonym
encoding, so the compressor always sees receiver-style text.
"""

from __future__ import annotations

import json
from collections import Counter, defaultdict
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Protocol, Sequence

import numpy as np

from .llm_client import ChatCompletionClient, LlmUnavailableError, load_template
from .text_model import EmptyTextError, NonAsciiCharacterError, Prompt, tokenize


class PoolTooSmallError(ValueError):
    """Fewer demonstrations available than requested shots."""


class TranslatorUnavailableError(RuntimeError):
    """Translation backend unreachable."""


class EmptyTranslationError(RuntimeError):
    """Backend produced a blank or untokenizable completion."""


@dataclass(frozen=True)
class Demonstration:
    """One shared image captioned by both sides."""

    image_id: str
    alice_prompt: Prompt
    bob_prompt: Prompt

    @classmethod
    def from_texts(cls, image_id: str, alice: str, bob: str) -> "Demonstration":
        return cls(image_id=image_id, alice_prompt=tokenize(alice), bob_prompt=tokenize(bob))


class TranslatorKind:
    LLM_CLIENT = "llm"
    MOCK = "mock"


@dataclass(frozen=True)
class SkdConfig:
    k_shots: int = 3
    translator: str = TranslatorKind.MOCK
    template_id: str = "skd_translate_v1"

    def __post_init__(self):
        if self.k_shots < 1:
            raise ValueError("k_shots must be >= 1")


def load_demo_pool(path: str | Path | None = None) -> list[Demonstration]:
    """Load demonstrations from a JSON list of {image_id, alice, bob}."""
    if path is None:
        text = resources.files("semcom.data").joinpath("demo_pool.json").read_text()
    else:
        text = Path(path).read_text()
    return [Demonstration.from_texts(d["image_id"], d["alice"], d["bob"])
            for d in json.loads(text)]


def build_demonstrations(pool: Sequence[Demonstration], k: int,
                         seed: int) -> list[Demonstration]:
    """Seeded k-sample without replacement, keeping pool order."""
    if k > len(pool):
        raise PoolTooSmallError(f"need {k} demonstrations, pool has {len(pool)}")
    rng = np.random.Generator(np.random.PCG64(seed))
    picked = sorted(rng.choice(len(pool), size=k, replace=False).tolist())
    return [pool[i] for i in picked]


class T2tTranslator(Protocol):
    def translate_text(self, alice_text: str, demos: Sequence[Demonstration]) -> str: ...


class MockTranslator:
    """Deterministic word-substitution translator learned from demos.

    Demo word pairs are aligned by position (up to the shorter length); each
    sender word maps to its most frequent receiver counterpart, ties resolved
    toward the lexicographically smaller word. Words without a mapping pass
    through. Identity demonstrations therefore yield the identity translation.
    """

    def translate_text(self, alice_text: str, demos: Sequence[Demonstration]) -> str:
        counts: dict[str, Counter] = defaultdict(Counter)
        for demo in demos:
            for a, b in zip(demo.alice_prompt.word_texts, demo.bob_prompt.word_texts):
                counts[a][b] += 1
        table = {a: min(c.items(), key=lambda kv: (-kv[1], kv[0]))[0]
                 for a, c in counts.items()}
        prompt = tokenize(alice_text)
        out = prompt.with_words([table.get(w, w) for w in prompt.word_texts])
        return out.source_text


class LlmTranslator:
    """Few-shot chat translation with a versioned template asset."""

    def __init__(self, client: ChatCompletionClient, template_id: str = "skd_translate_v1"):
        self.client = client
        self.template_id = template_id
        self._template = load_template(template_id)

    def translate_text(self, alice_text: str, demos: Sequence[Demonstration]) -> str:
        shots = "\n".join(
            f"A: {d.alice_prompt.source_text}\nB: {d.bob_prompt.source_text}"
            for d in demos)
        prompt = self._template.format(demonstrations=shots, prompt=alice_text)
        try:
            reply = self.client.complete([{"role": "user", "content": prompt}])
        except LlmUnavailableError as e:
            raise TranslatorUnavailableError(str(e)) from e
        return reply.strip().splitlines()[0].strip() if reply.strip() else ""


def translate(alice_prompt: Prompt, demos: Sequence[Demonstration], cfg: SkdConfig,
              translator: T2tTranslator) -> Prompt:
    """Rewrite a sender prompt into receiver style; output feeds compression.

    The completion is normalized and re-tokenized so downstream stages see a
    regular prompt; blank or non-ASCII output raises EmptyTranslationError.
    """
    text = translator.translate_text(alice_prompt.source_text, demos)
    if not text or not text.strip():
        raise EmptyTranslationError("translator returned a blank completion")
    try:
        return tokenize(text)
    except (EmptyTextError, NonAsciiCharacterError) as e:
        raise EmptyTranslationError(f"translator output unusable: {e}") from e
