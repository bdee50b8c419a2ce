"""Progressive word-by-word transmission.

Each word travels in its own frame; only payload characters see channel
noise (headers are out-of-band, since corrupting framing would mix protocol
loss into the per-character noise model). The receiver accumulates words in
index order, joined by single spaces, and a sink is notified after every
step with the prompt so far, so downstream consumers (metrics, image
generation) can react per step.

Frame wire layout, big-endian:

    byte 0   magic 0x4C
    byte 1   version 0x01
    bytes 2-3  word index (1-based within a session)
    byte 4   payload character count
    bytes 5+   payload, one byte per ASCII character
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Protocol

from .channel import ChannelKind, ChannelSpec, transmit
from .text_model import Prompt

FRAME_MAGIC = 0x4C
FRAME_VERSION = 0x01
_HEADER = struct.Struct(">BBHB")


class MalformedFrameError(ValueError):
    """Bad magic, version, bounds, or length mismatch."""


@dataclass(frozen=True)
class Frame:
    """One transmitted word. ``word_index`` is 1-based and strictly
    increasing within a session."""

    word_index: int
    char_count: int
    payload: str

    def __post_init__(self):
        if self.char_count != len(self.payload):
            raise MalformedFrameError("char_count must equal payload length")


def encode_frame(word_index: int, payload: str) -> bytes:
    if not 0 <= word_index <= 0xFFFF:
        raise MalformedFrameError(f"word_index {word_index} out of 16-bit range")
    if len(payload) > 0xFF:
        raise MalformedFrameError(f"payload of {len(payload)} chars exceeds 255")
    try:
        body = payload.encode("ascii")
    except UnicodeEncodeError as e:
        raise MalformedFrameError(f"payload must be ASCII: {e}") from e
    return _HEADER.pack(FRAME_MAGIC, FRAME_VERSION, word_index, len(body)) + body


def decode_frame(data: bytes) -> Frame:
    if len(data) < _HEADER.size:
        raise MalformedFrameError("frame shorter than header")
    magic, version, word_index, char_count = _HEADER.unpack_from(data)
    if magic != FRAME_MAGIC:
        raise MalformedFrameError(f"bad magic 0x{magic:02X}")
    if version != FRAME_VERSION:
        raise MalformedFrameError(f"unsupported version {version}")
    body = data[_HEADER.size:]
    if len(body) != char_count:
        raise MalformedFrameError(f"expected {char_count} payload bytes, got {len(body)}")
    return Frame(word_index=word_index, char_count=char_count,
                 payload=body.decode("ascii", errors="replace"))


class GenerationSink(Protocol):
    """Receives the accumulated prompt after every step."""

    def on_step(self, session_id: str, step: int, prompt_text: str) -> None: ...


class NullSink:
    def on_step(self, session_id: str, step: int, prompt_text: str) -> None:
        pass


class CollectingSink:
    """Keeps every (step, prompt) notification; handy in tests."""

    def __init__(self):
        self.snapshots: list[tuple[int, str]] = []

    def on_step(self, session_id: str, step: int, prompt_text: str) -> None:
        self.snapshots.append((step, prompt_text))


@dataclass
class ReceiverState:
    """Receiver-side words in index order and the prompt they spell."""

    received_words: list[tuple[int, str]] = field(default_factory=list)

    def add(self, word_index: int, text: str) -> None:
        self.received_words.append((word_index, text))
        self.received_words.sort(key=lambda p: p[0])

    @property
    def accumulated_prompt(self) -> str:
        return " ".join(text for _, text in self.received_words)


@dataclass(frozen=True)
class StepMetrics:
    """Cumulative counters up to and including this step."""

    words_sent: int
    chars_sent: int
    char_errors: int


@dataclass(frozen=True)
class TraceStep:
    frame_sent: Frame
    frame_received: Frame
    receiver_prompt: str
    metrics: StepMetrics
    sink_error: str | None = None


@dataclass(frozen=True)
class TransmissionTrace:
    session_id: str
    channel: ChannelSpec
    steps: tuple[TraceStep, ...]
    meta: dict = field(default_factory=dict)

    @property
    def sent_words(self) -> tuple[str, ...]:
        return tuple(s.frame_sent.payload for s in self.steps)

    @property
    def received_words(self) -> tuple[str, ...]:
        return tuple(s.frame_received.payload for s in self.steps)


def run_session(encoded: Prompt, spec: ChannelSpec, sink: GenerationSink | None = None,
                session_id: str = "s0", meta: dict | None = None) -> TransmissionTrace:
    """Transmit a prompt word by word and record every step.

    The channel noise substream for word t is derived from (spec.seed, t), so
    a session is reproducible independent of anything sent before it. Sink
    failures are recorded on the step, never fatal; channel errors propagate.
    """
    sink = sink or NullSink()
    receiver = ReceiverState()
    steps: list[TraceStep] = []
    chars_sent = 0
    char_errors = 0
    for t, word in enumerate(encoded.words, start=1):
        wire = encode_frame(t, word.text)
        header, payload = wire[:_HEADER.size], wire[_HEADER.size:]
        record = transmit(payload.decode("ascii"), spec, stream=t)
        frame_sent = decode_frame(wire)
        frame_received = decode_frame(header + record.received.encode("ascii"))
        receiver.add(t, frame_received.payload)
        chars_sent += len(record.sent)
        char_errors += record.char_errors
        snapshot = receiver.accumulated_prompt
        sink_error = None
        try:
            sink.on_step(session_id, t, snapshot)
        except Exception as e:  # sink problems must not kill the session
            sink_error = f"{type(e).__name__}: {e}"
        steps.append(TraceStep(
            frame_sent=frame_sent,
            frame_received=frame_received,
            receiver_prompt=snapshot,
            metrics=StepMetrics(words_sent=t, chars_sent=chars_sent,
                                char_errors=char_errors),
            sink_error=sink_error,
        ))
    return TransmissionTrace(session_id=session_id, channel=spec,
                             steps=tuple(steps), meta=dict(meta or {}))


def _channel_dict(spec: ChannelSpec) -> dict:
    return {"kind": spec.kind.value, "snr_db": spec.snr_db,
            "epsilon": spec.epsilon, "seed": spec.seed}


def _channel_from_dict(d: dict) -> ChannelSpec:
    return ChannelSpec(kind=ChannelKind(d["kind"]), snr_db=d.get("snr_db"),
                       epsilon=d.get("epsilon"), seed=int(d.get("seed", 0)))


def step_to_dict(trace: TransmissionTrace, step: TraceStep) -> dict:
    """One JSONL line: self-contained, one step per line."""
    return {
        "session_id": trace.session_id,
        "t": step.frame_sent.word_index,
        "sent": step.frame_sent.payload,
        "received": step.frame_received.payload,
        "char_count": step.frame_sent.char_count,
        "accumulated_prompt": step.receiver_prompt,
        "words_sent": step.metrics.words_sent,
        "chars_sent": step.metrics.chars_sent,
        "char_errors": step.metrics.char_errors,
        "sink_error": step.sink_error,
        "channel": _channel_dict(trace.channel),
        "meta": trace.meta,
    }


def write_trace_jsonl(traces: Iterable[TransmissionTrace], path: str | Path) -> int:
    """Append-free write of traces as line-delimited JSON; returns line count."""
    lines = 0
    with open(path, "w") as fh:
        for trace in traces:
            for step in trace.steps:
                fh.write(json.dumps(step_to_dict(trace, step), sort_keys=True) + "\n")
                lines += 1
    return lines


def read_trace_jsonl(path: str | Path) -> list[TransmissionTrace]:
    """Rebuild traces from a JSONL file written by write_trace_jsonl."""
    by_session: dict[str, list[dict]] = {}
    order: list[str] = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            obj = json.loads(line)
            sid = obj["session_id"]
            if sid not in by_session:
                by_session[sid] = []
                order.append(sid)
            by_session[sid].append(obj)
    traces = []
    for sid in order:
        rows = sorted(by_session[sid], key=lambda o: o["t"])
        steps = []
        for o in rows:
            sent = Frame(o["t"], len(o["sent"]), o["sent"])
            received = Frame(o["t"], len(o["received"]), o["received"])
            steps.append(TraceStep(
                frame_sent=sent, frame_received=received,
                receiver_prompt=o["accumulated_prompt"],
                metrics=StepMetrics(words_sent=o["words_sent"],
                                    chars_sent=o["chars_sent"],
                                    char_errors=o["char_errors"]),
                sink_error=o.get("sink_error"),
            ))
        traces.append(TransmissionTrace(
            session_id=sid, channel=_channel_from_dict(rows[0]["channel"]),
            steps=tuple(steps), meta=rows[0].get("meta", {})))
    return traces
