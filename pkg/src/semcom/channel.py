"""Character channel simulation.

Two interchangeable channel kinds:

* ``WAVEFORM_16QAM`` - each 8-bit character becomes two Gray-coded square
  16QAM symbols on a unit-average-energy constellation, passes through
  complex AWGN at the configured Es/N0, and is hard-sliced back to bits.
  Demodulated bytes >= 128 (possible under noise, invalid as source text)
  are mapped to the replacement character '?'.
* ``ANALYTIC_DMC`` - each character is independently replaced, with
  probability epsilon, by a uniformly random *different* character from the
  128-symbol alphabet.

SNR convention: ``snr_db`` is Es/N0 per 16QAM symbol. This choice shifts the
epsilon-vs-SNR curve relative to per-bit conventions, so it is stated here
once and used everywhere.

Randomness: a single pinned generator family (numpy PCG64). The noise stream
for a call is derived as ``SeedSequence(seed, spawn_key=(stream,))`` so that
per-word and per-trial streams are reproducible regardless of call order or
thread count.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

ALPHABET_SIZE = 128
REPLACEMENT_CHAR = "?"

# Reflected Gray code on 2 bits per rail; level index 0..3 maps to
# amplitudes (-3,-1,+1,+3)/sqrt(10) for unit average symbol energy.
_GRAY_OF_LEVEL = np.array([0, 1, 3, 2], dtype=np.uint8)
_LEVEL_OF_GRAY = np.argsort(_GRAY_OF_LEVEL).astype(np.uint8)
_SCALE = 1.0 / math.sqrt(10.0)
_AMPLITUDES = (2.0 * np.arange(4) - 3.0) * _SCALE


class NonAsciiInputError(ValueError):
    """Channel input must already be 7-bit ASCII."""


class ChannelKind(enum.Enum):
    WAVEFORM_16QAM = "waveform16qam"
    ANALYTIC_DMC = "analytic_dmc"


@dataclass(frozen=True)
class ChannelSpec:
    """Channel configuration. ``seed`` fully determines the noise stream."""

    kind: ChannelKind
    snr_db: float | None = None
    epsilon: float | None = None
    seed: int = 0

    def __post_init__(self):
        if self.kind is ChannelKind.WAVEFORM_16QAM:
            if self.snr_db is None or not math.isfinite(self.snr_db):
                raise ValueError("waveform channel requires a finite snr_db")
        else:
            if self.epsilon is None or not 0.0 <= self.epsilon < 1.0:
                raise ValueError("DMC requires 0 <= epsilon < 1")

    @property
    def es_n0(self) -> float:
        """Linear Es/N0 per 16QAM symbol."""
        if self.snr_db is None:
            raise ValueError("es_n0 undefined for a DMC spec")
        return 10.0 ** (self.snr_db / 10.0)

    @classmethod
    def waveform(cls, snr_db: float, seed: int = 0) -> "ChannelSpec":
        return cls(kind=ChannelKind.WAVEFORM_16QAM, snr_db=snr_db, seed=seed)

    @classmethod
    def dmc(cls, epsilon: float, seed: int = 0) -> "ChannelSpec":
        return cls(kind=ChannelKind.ANALYTIC_DMC, epsilon=epsilon, seed=seed)


@dataclass(frozen=True)
class CorruptionRecord:
    """Result of pushing one text through the channel.

    char_errors is the character-level Hamming distance between sent and
    received strings; symbol_errors counts differing 4-bit symbols (two per
    character) before replacement mapping.
    """

    sent: str
    received: str
    char_errors: int
    symbol_errors: int

    def __post_init__(self):
        if len(self.sent) != len(self.received):
            raise ValueError("channel must preserve length")


def q_function(x: float) -> float:
    """Gaussian tail probability Q(x) = P(N(0,1) > x)."""
    return 0.5 * math.erfc(x / math.sqrt(2.0))


def epsilon_of_snr(snr_db: float) -> float:
    """Character crossover probability of the 16QAM waveform channel.

    With p the per-rail 4-PAM error probability at Es/N0 (linear),
    p = (3/2) Q(sqrt(Es/N0 / 5)), the symbol error probability is
    P_s = 1 - (1 - p)^2 and a character (two symbols) errs with
    1 - (1 - P_s)^2. Exact for hard minimum-distance slicing on the
    unit-energy Gray constellation; monotone decreasing in snr_db.
    """
    es_n0 = 10.0 ** (snr_db / 10.0)
    p = 1.5 * q_function(math.sqrt(es_n0 / 5.0))
    p_symbol = 1.0 - (1.0 - p) ** 2
    return 1.0 - (1.0 - p_symbol) ** 2


def _rng_for(spec: ChannelSpec, stream: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(spec.seed, spawn_key=(stream,))))


def _text_to_bytes(text: str) -> np.ndarray:
    try:
        raw = text.encode("ascii")
    except UnicodeEncodeError as e:
        raise NonAsciiInputError(f"channel input must be ASCII: {e}") from e
    return np.frombuffer(raw, dtype=np.uint8)


def _transmit_waveform(data: np.ndarray, spec: ChannelSpec, rng: np.random.Generator) -> np.ndarray:
    # two 4-bit symbols per byte, high nibble first
    symbols = np.empty(2 * data.size, dtype=np.uint8)
    symbols[0::2] = data >> 4
    symbols[1::2] = data & 0x0F
    gray_i = symbols >> 2
    gray_q = symbols & 0x03
    tx = _AMPLITUDES[_LEVEL_OF_GRAY[gray_i]] + 1j * _AMPLITUDES[_LEVEL_OF_GRAY[gray_q]]

    n0 = 1.0 / spec.es_n0  # Es = 1 by construction
    sigma = math.sqrt(n0 / 2.0)
    noise = rng.normal(0.0, sigma, tx.size) + 1j * rng.normal(0.0, sigma, tx.size)
    rx = tx + noise

    # hard minimum-distance slicing per rail, then back through Gray map
    lvl_i = np.clip(np.rint((rx.real / _SCALE + 3.0) / 2.0), 0, 3).astype(np.uint8)
    lvl_q = np.clip(np.rint((rx.imag / _SCALE + 3.0) / 2.0), 0, 3).astype(np.uint8)
    rx_symbols = (_GRAY_OF_LEVEL[lvl_i] << 2) | _GRAY_OF_LEVEL[lvl_q]
    return (rx_symbols[0::2].astype(np.uint8) << 4) | rx_symbols[1::2]


def _transmit_dmc(data: np.ndarray, spec: ChannelSpec, rng: np.random.Generator) -> np.ndarray:
    hit = rng.random(data.size) < spec.epsilon
    # adding 1..127 mod 128 is uniform over the other 127 symbols
    shift = rng.integers(1, ALPHABET_SIZE, size=data.size, dtype=np.uint8)
    out = data.copy()
    out[hit] = (out[hit] + shift[hit]) % ALPHABET_SIZE
    return out


def transmit(text: str, spec: ChannelSpec, stream: int = 0) -> CorruptionRecord:
    """Send ``text`` through the channel, one character per 8-bit frame slot.

    ``stream`` selects an independent, reproducible noise substream (word
    index within a session, trial index within a sweep). Deterministic given
    (text, spec, stream).
    """
    data = _text_to_bytes(text)
    if data.size == 0:
        return CorruptionRecord(sent=text, received="", char_errors=0, symbol_errors=0)
    rng = _rng_for(spec, stream)
    if spec.kind is ChannelKind.WAVEFORM_16QAM:
        out = _transmit_waveform(data, spec, rng)
    else:
        out = _transmit_dmc(data, spec, rng)

    symbol_errors = int(np.count_nonzero((out >> 4) != (data >> 4))
                        + np.count_nonzero((out & 0x0F) != (data & 0x0F)))
    # bytes >= 128 are not source symbols; the receiver shows '?'
    visible = np.where(out >= ALPHABET_SIZE, np.uint8(ord(REPLACEMENT_CHAR)), out)
    received = visible.tobytes().decode("ascii")
    char_errors = sum(1 for a, b in zip(text, received) if a != b)
    return CorruptionRecord(sent=text, received=received, char_errors=char_errors,
                            symbol_errors=symbol_errors)
