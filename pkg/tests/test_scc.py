import functools
import json

import numpy as np
import pytest
from hypothesis import given, strategies as st

from semcom.channel import ChannelSpec, transmit
from semcom.scc import (MASK_TOKEN, LlmSynonymOracle, OracleUnavailableError,
                        SccConfig, StaticDictionary, SynonymCandidate,
                        _parse_synonym_reply, encode_prompt, encode_word,
                        levenshtein, survival_decode)
from semcom.llm_client import ChatCompletionClient
from semcom.text_model import Prompt, tokenize


def _prompt(*words) -> Prompt:
    return Prompt.from_words(words)


def _oracle(mapping) -> StaticDictionary:
    return StaticDictionary(mapping)


def test_encode_word_picks_longest_admitted():
    oracle = _oracle({"cat": [{"synonym": "feline", "p": 0.9},
                              {"synonym": "kitty", "p": 0.8}]})
    p = _prompt("the", "cat", "sleeps")
    enc = encode_word(p.words[1], p, SccConfig(), oracle)
    assert enc.chosen.text == "feline"
    assert enc.expansion == 3
    assert not enc.is_identity
    assert enc.levels == {5, 6}


def test_encode_word_identity_when_all_shorter():
    oracle = _oracle({"automobile": [{"synonym": "car", "p": 0.95}]})
    p = _prompt("an", "automobile", "waits")
    enc = encode_word(p.words[1], p, SccConfig(), oracle)
    assert enc.chosen.text == "automobile"
    assert enc.is_identity
    assert enc.chosen.probability == 1.0
    assert enc.levels == {10}


def test_encode_word_threshold_excludes():
    oracle = _oracle({"dog": [{"synonym": "canine", "p": 0.70}]})
    p = _prompt("the", "dog")
    enc = encode_word(p.words[1], p, SccConfig(p_c=0.72), oracle)
    assert enc.chosen.text == "dog"
    assert enc.is_identity


def test_encode_word_threshold_is_inclusive():
    oracle = _oracle({"dog": [{"synonym": "canine", "p": 0.72}]})
    p = _prompt("the", "dog")
    enc = encode_word(p.words[1], p, SccConfig(p_c=0.72), oracle)
    assert enc.chosen.text == "canine"


def test_encode_word_expansion_cap():
    oracle = _oracle({"man": [{"synonym": "gentleman", "p": 0.95},
                              {"synonym": "fellow", "p": 0.8}]})
    p = _prompt("a", "man", "waves")
    enc = encode_word(p.words[1], p, SccConfig(expansion_cap=4), oracle)
    # gentleman would add 6 characters, over the cap; fellow adds 3
    assert enc.chosen.text == "fellow"
    uncapped = encode_word(p.words[1], p, SccConfig(expansion_cap=6), oracle)
    assert uncapped.chosen.text == "gentleman"


def test_encode_word_tie_breaks():
    oracle = _oracle({"cat": [{"synonym": "lion", "p": 0.8},
                              {"synonym": "puma", "p": 0.9},
                              {"synonym": "mink", "p": 0.9}]})
    p = _prompt("a", "cat")
    enc = encode_word(p.words[1], p, SccConfig(), oracle)
    # equal length: higher probability wins, then lexicographic order
    assert enc.chosen.text == "mink"


def test_encode_word_masks_context():
    seen = {}

    class SpyOracle:
        def candidates(self, masked_prompt, word):
            seen["masked"] = masked_prompt
            seen["word"] = word
            return []

    p = _prompt("the", "cat", "sleeps")
    encode_word(p.words[1], p, SccConfig(), SpyOracle())
    assert seen["masked"] == f"the {MASK_TOKEN} sleeps"
    assert seen["word"] == "cat"


def test_encode_word_requires_word_in_context():
    p = _prompt("the", "cat")
    other = _prompt("a", "dog")
    with pytest.raises(ValueError):
        encode_word(other.words[1], p, SccConfig(), _oracle({}))


def test_encode_prompt_identity_round_trip():
    p = _prompt("dog", "runs")
    encoded, encodings = encode_prompt(p, SccConfig(), _oracle({}))
    assert encoded.word_texts == p.word_texts
    assert all(e.is_identity for e in encodings)


def test_encode_prompt_substitutes_in_order():
    oracle = _oracle({"dog": [{"synonym": "canine", "p": 0.8}],
                      "runs": [{"synonym": "sprints", "p": 0.77}]})
    p = _prompt("dog", "runs")
    encoded, encodings = encode_prompt(p, SccConfig(), oracle)
    assert encoded.word_texts == ("canine", "sprints")
    assert [e.head_word.text for e in encodings] == ["dog", "runs"]


def test_encode_prompt_concurrent_keeps_order():
    oracle = _oracle({w: [{"synonym": w + "xx", "p": 0.9}]
                      for w in ("aa", "bb", "cc", "dd", "ee", "ff")})
    p = _prompt("aa", "bb", "cc", "dd", "ee", "ff")
    encoded, _ = encode_prompt(p, SccConfig(), oracle, max_workers=4)
    assert encoded.word_texts == ("aaxx", "bbxx", "ccxx", "ddxx", "eexx", "ffxx")


def test_invariants_on_randomized_oracles():
    rng = np.random.default_rng(7)
    letters = "abcdefghijklmnopqrstuvwxyz"
    cfg = SccConfig()
    for _ in range(300):
        word_len = int(rng.integers(2, 9))
        word = "".join(letters[i] for i in rng.integers(0, 26, word_len))
        syns = []
        for _ in range(int(rng.integers(0, 6))):
            s_len = int(rng.integers(1, 14))
            text = "".join(letters[i] for i in rng.integers(0, 26, s_len))
            syns.append({"synonym": text, "p": float(rng.random())})
        p = _prompt("the", word)
        enc = encode_word(p.words[1], p, cfg, _oracle({word: syns}))
        assert len(enc.chosen.text) >= len(word)
        assert len(enc.chosen.text) - len(word) <= cfg.expansion_cap
        assert enc.chosen.probability >= cfg.p_c or enc.is_identity
        assert enc.chosen in enc.admitted
        assert len(enc.chosen.text) in enc.levels


def test_candidate_validation():
    with pytest.raises(ValueError):
        SynonymCandidate("", 0.5)
    with pytest.raises(ValueError):
        SynonymCandidate("ok", 1.5)
    with pytest.raises(ValueError):
        SynonymCandidate("café", 0.5)


def test_static_dictionary_skips_malformed(tmp_path):
    path = tmp_path / "syn.json"
    path.write_text(json.dumps({"dog": [{"synonym": "canine", "p": 0.8},
                                        {"synonym": "hound"},
                                        {"p": 0.9},
                                        {"synonym": "wolfish", "p": "high"}]}))
    oracle = StaticDictionary.from_file(path)
    cands = oracle.candidates("the _", "dog")
    assert [c.text for c in cands] == ["canine"]


def test_static_dictionary_clamps_probability():
    oracle = _oracle({"dog": [{"synonym": "canine", "p": 7.5}]})
    cands = oracle.candidates("the _", "dog")
    assert cands[0].probability == 1.0


def test_parse_synonym_reply():
    reply = 'Sure! {"synonyms": [{"synonym": "feline", "p": 0.9},' \
            ' {"synonym": "two words", "p": 0.8}, {"synonym": "kitty", "p": 2}]}'
    cands = _parse_synonym_reply(reply)
    assert [(c.text, c.probability) for c in cands] == [("feline", 0.9), ("kitty", 1.0)]
    assert _parse_synonym_reply("no json here") == []
    assert _parse_synonym_reply("{broken json") == []


def test_llm_oracle_unavailable_raises():
    client = ChatCompletionClient("http://127.0.0.1:1/v1/chat/completions",
                                  model="m", timeout=0.2, max_retries=1, backoff=0.0)
    oracle = LlmSynonymOracle(client)
    with pytest.raises(OracleUnavailableError):
        oracle.candidates("the _", "dog")


# --- survival decoding ---------------------------------------------------


def _brute_levenshtein(a: str, b: str) -> int:
    @functools.lru_cache(maxsize=None)
    def rec(i, j):
        if i == 0:
            return j
        if j == 0:
            return i
        return min(rec(i - 1, j) + 1, rec(i, j - 1) + 1,
                   rec(i - 1, j - 1) + (a[i - 1] != b[j - 1]))

    return rec(len(a), len(b))


def test_survival_decode_examples():
    assert survival_decode("bat", ["cat", "dog"]) == ("cat", 1)
    assert survival_decode("feline", ["cat", "feline", "define"]) == ("feline", 0)
    assert survival_decode("felXne", ["cat", "feline", "define"]) == ("feline", 1)


def test_survival_decode_tie_breaks():
    # equal distance: shorter word wins, then lexicographic order
    assert survival_decode("ab", ["abc", "abd"]) == ("abc", 1)
    assert survival_decode("abcd", ["abce", "abcf", "abc"]) == ("abc", 1)


def test_survival_decode_requires_vocabulary():
    with pytest.raises(ValueError):
        survival_decode("x", [])


short_words = st.text(alphabet=st.sampled_from("abcdef"), min_size=0, max_size=7)


@given(short_words, short_words)
def test_levenshtein_matches_brute_force(a, b):
    assert levenshtein(a, b) == _brute_levenshtein(a, b)


@given(st.lists(short_words.filter(bool), min_size=1, max_size=5), short_words)
def test_survival_decode_matches_exhaustive_min(vocab, received):
    decoded, dist = survival_decode(received, vocab)
    keys = sorted((_brute_levenshtein(received, w), len(w), w) for w in vocab)
    assert (dist, len(decoded), decoded) == keys[0]


def test_longer_word_survives_more_often():
    # constructed vocabulary: the short word has same-length neighbors, the
    # long one does not; recovery through a DMC must favor the long word
    vocab = ["cat", "bat", "cut", "car", "feline"]
    trials = 4000

    def recovery_rate(word: str, seed: int) -> float:
        hits = 0
        spec = ChannelSpec.dmc(0.05, seed=seed)
        for k in range(trials):
            received = transmit(word, spec, stream=k).received
            hits += survival_decode(received, vocab)[0] == word
        return hits / trials

    assert recovery_rate("feline", 11) >= recovery_rate("cat", 12)
