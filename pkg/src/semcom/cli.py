"""Config-driven experiment runner.

Verbs:

* ``compress``    - compression ratio table over a caption corpus
* ``sweep-snr``   - survival and character error rate versus SNR
* ``sweep-chars`` - per-step metrics versus cumulative transmitted characters
* ``trace``       - verbose single-session dump

All randomness is derived from one master seed through documented
SeedSequence spawn keys, so a command with the same config and seed writes
byte-identical output files. Network oracles are off by default; the bundled
dictionary, demo pool, and corpus make every verb runnable offline.

Exit codes: 0 ok, 1 config error, 2 runtime error.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Sequence

import numpy as np

from . import __version__
from .channel import ChannelKind, ChannelSpec
from .llm_client import ChatCompletionClient
from .metrics_report import (ExportFormat, MetricsRow, SweepAxis, aggregate,
                             export_rows, export_sweep, sweep_from_groups)
from .protocol import TransmissionTrace, run_session, write_trace_jsonl
from .scc import OracleKind, SccConfig, StaticDictionary, LlmSynonymOracle, encode_prompt
from .skd import (LlmTranslator, MockTranslator, SkdConfig, TranslatorKind,
                  build_demonstrations, load_demo_pool, translate)
from .ssc import (ExternalParserIdentifier, RuleBasedIdentifier, ShuffleMode,
                  compress, identify_heads, shuffle_baseline)
from .text_model import Prompt, tokenize

# seed-derivation domains (first spawn-key element)
_DOMAIN_SKD = 0
_DOMAIN_BASELINE = 1
_DOMAIN_CHANNEL = 2

PIPELINES = ("full", "ssc", "ssc+scc", "skd+ssc", "skd+ssc+scc")
BASELINE_VARIANTS = ("random-words", "random-order")


class ConfigError(ValueError):
    """Bad config file, bad flag value, or an impossible pipeline."""


@dataclass
class ExperimentConfig:
    corpus: str = "bundled"
    pipeline: str = "ssc"
    variants: list[str] = field(default_factory=list)  # empty -> [pipeline]
    channel_kind: str = ChannelKind.WAVEFORM_16QAM.value
    snr_db: float = 6.25
    epsilon: float | None = None
    snrs: list[float] = field(default_factory=lambda: [2.5, 5.0, 6.25, 7.5, 8.75])
    p_c: float = 0.72
    expansion_cap: int = 4
    oracle: str = OracleKind.STATIC_DICTIONARY.value
    synonyms: str = "bundled"
    k_shots: int = 3
    translator: str = TranslatorKind.MOCK
    demo_pool: str = "bundled"
    parser_endpoint: str | None = None
    llm_url: str | None = None
    llm_model: str | None = None
    runs: int = 1
    seed: int = 1234
    output_dir: str = "out"
    include_baselines: bool = False
    workers: int = 1
    emit_traces: bool = True

    def __post_init__(self):
        for variant in self.effective_variants():
            _pipeline_flags(variant)
        if self.runs < 1:
            raise ConfigError("runs must be >= 1")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")
        if self.channel_kind not in (k.value for k in ChannelKind):
            raise ConfigError(f"unknown channel kind {self.channel_kind!r}")
        if self.channel_kind == ChannelKind.ANALYTIC_DMC.value and self.epsilon is None:
            raise ConfigError("analytic_dmc channel requires epsilon")

    def effective_variants(self) -> list[str]:
        return list(self.variants) if self.variants else [self.pipeline]

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        try:
            return cls(**data)
        except TypeError as e:
            raise ConfigError(str(e)) from e


@dataclass(frozen=True)
class _PipelineFlags:
    skd: bool
    ssc: bool
    scc: bool


def _pipeline_flags(variant: str) -> _PipelineFlags:
    if variant in BASELINE_VARIANTS:
        return _PipelineFlags(skd=False, ssc=True, scc=False)
    parts = variant.split("+") if variant != "full" else []
    flags = _PipelineFlags(skd="skd" in parts, ssc="ssc" in parts, scc="scc" in parts)
    valid = variant == "full" or (set(parts) <= {"skd", "ssc", "scc"} and flags.ssc)
    if not valid or (flags.scc and not flags.ssc):
        raise ConfigError(
            f"invalid pipeline {variant!r}; choose from {PIPELINES + BASELINE_VARIANTS}"
            " (synonym coding requires head compression)")
    return flags


def derive_seed(master: int, *key: int) -> int:
    """Deterministic child seed for (domain, indices...) spawn keys."""
    ss = np.random.SeedSequence(master, spawn_key=tuple(key))
    return int(ss.generate_state(1, np.uint64)[0])


def load_corpus(spec: str) -> list[str]:
    if spec == "bundled":
        text = resources.files("semcom.data").joinpath("captions_100.txt").read_text()
    else:
        path = Path(spec)
        if not path.exists():
            raise ConfigError(f"corpus file not found: {path}")
        text = path.read_text()
    captions = [line.strip() for line in text.splitlines() if line.strip()]
    if not captions:
        raise ConfigError(f"corpus {spec!r} holds no captions")
    return captions


class _Runtime:
    """Lazily built shared pieces: identifier, oracle, translator, demos."""

    def __init__(self, cfg: ExperimentConfig):
        self.cfg = cfg
        self.identifier = (ExternalParserIdentifier(cfg.parser_endpoint)
                           if cfg.parser_endpoint else RuleBasedIdentifier())
        self.scc_config = SccConfig(p_c=cfg.p_c, expansion_cap=cfg.expansion_cap,
                                    oracle=OracleKind(cfg.oracle))
        if self.scc_config.oracle is OracleKind.LLM_CLIENT:
            if not (cfg.llm_url and cfg.llm_model):
                raise ConfigError("llm oracle needs llm_url and llm_model")
            client = ChatCompletionClient(cfg.llm_url, cfg.llm_model)
            self.oracle = LlmSynonymOracle(client)
        elif cfg.synonyms == "bundled":
            self.oracle = StaticDictionary.bundled()
        else:
            self.oracle = StaticDictionary.from_file(cfg.synonyms)
        self.skd_config = SkdConfig(k_shots=cfg.k_shots, translator=cfg.translator)
        self._demos = None

    def demos(self):
        if self._demos is None:
            pool = load_demo_pool(None if self.cfg.demo_pool == "bundled"
                                  else self.cfg.demo_pool)
            self._demos = build_demonstrations(
                pool, self.skd_config.k_shots,
                derive_seed(self.cfg.seed, _DOMAIN_SKD))
        return self._demos

    def translator(self):
        if self.cfg.translator == TranslatorKind.LLM_CLIENT:
            if not (self.cfg.llm_url and self.cfg.llm_model):
                raise ConfigError("llm translator needs llm_url and llm_model")
            return LlmTranslator(ChatCompletionClient(self.cfg.llm_url, self.cfg.llm_model))
        return MockTranslator()


@dataclass(frozen=True)
class PreparedMessage:
    encoded: Prompt
    word_ratio: float
    char_ratio: float


def prepare_message(caption: str, variant: str, rt: _Runtime,
                    caption_index: int) -> PreparedMessage:
    """Apply the variant's pipeline stages to one caption (channel-free)."""
    flags = _pipeline_flags(variant)
    prompt = tokenize(caption)
    if flags.skd:
        prompt = translate(prompt, rt.demos(), rt.skd_config, rt.translator())
    if not flags.ssc:
        return PreparedMessage(encoded=Prompt.from_words(prompt.word_texts),
                               word_ratio=1.0, char_ratio=1.0)
    selection = identify_heads(prompt, rt.identifier)
    compressed, report = compress(selection)
    if variant in BASELINE_VARIANTS:
        mode = (ShuffleMode.RANDOM_WORDS if variant == "random-words"
                else ShuffleMode.RANDOM_ORDER)
        seed = derive_seed(rt.cfg.seed, _DOMAIN_BASELINE, caption_index,
                           0 if mode is ShuffleMode.RANDOM_WORDS else 1)
        shuffled = shuffle_baseline(selection, seed, mode)
        return PreparedMessage(encoded=shuffled,
                               word_ratio=float(report.word_ratio),
                               char_ratio=shuffled.total_chars / prompt.total_chars)
    if flags.scc:
        encoded, _ = encode_prompt(compressed, rt.scc_config, rt.oracle)
        return PreparedMessage(encoded=encoded,
                               word_ratio=float(report.word_ratio),
                               char_ratio=encoded.total_chars / prompt.total_chars)
    return PreparedMessage(encoded=compressed,
                           word_ratio=float(report.word_ratio),
                           char_ratio=float(report.char_ratio))


def _channel_for(cfg: ExperimentConfig, snr_db: float | None, seed: int) -> ChannelSpec:
    if cfg.channel_kind == ChannelKind.ANALYTIC_DMC.value:
        return ChannelSpec.dmc(cfg.epsilon, seed=seed)
    return ChannelSpec.waveform(cfg.snr_db if snr_db is None else snr_db, seed=seed)


def _run_sessions(jobs: Sequence[tuple], workers: int) -> list[TransmissionTrace]:
    def one(job):
        message, spec, session_id, meta = job
        return run_session(message.encoded, spec, session_id=session_id, meta=meta)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(one, jobs))
    return [one(job) for job in jobs]


def _write_manifest(cfg: ExperimentConfig, command: str, out_dir: Path) -> None:
    manifest = {
        "command": command,
        "config": dataclasses.asdict(cfg),
        "seed": cfg.seed,
        "version": __version__,
    }
    (out_dir / "manifest.json").write_text(json.dumps(manifest, sort_keys=True, indent=2) + "\n")


def cmd_compress(cfg: ExperimentConfig, out_dir: Path) -> dict:
    """Compression ratio table over the corpus for the configured pipeline."""
    rt = _Runtime(cfg)
    captions = load_corpus(cfg.corpus)
    records = []
    for i, caption in enumerate(captions):
        message = prepare_message(caption, cfg.pipeline, rt, i)
        prompt = tokenize(caption)
        records.append({
            "caption_index": i,
            "word_count": len(prompt.words),
            "sent_words": len(message.encoded.words),
            "word_ratio": message.word_ratio,
            "char_ratio": message.char_ratio,
        })
    mean_word = sum(r["word_ratio"] for r in records) / len(records)
    mean_char = sum(r["char_ratio"] for r in records) / len(records)
    with open(out_dir / "compression.jsonl", "w") as fh:
        for rec in records:
            fh.write(json.dumps(rec, sort_keys=True) + "\n")
    summary = {"pipeline": cfg.pipeline, "captions": len(records),
               "mean_word_ratio": mean_word, "mean_char_ratio": mean_char}
    (out_dir / "summary.json").write_text(json.dumps(summary, sort_keys=True, indent=2) + "\n")
    print(f"{cfg.pipeline}: {len(records)} captions, "
          f"mean word ratio {mean_word:.4f}, mean char ratio {mean_char:.4f}")
    return summary


def _sweep_jobs(cfg: ExperimentConfig, rt: _Runtime, captions: list[str], variant: str,
                variant_idx: int, snr_db: float | None, snr_idx: int) -> list[tuple]:
    jobs = []
    messages = [prepare_message(c, variant, rt, i) for i, c in enumerate(captions)]
    for run in range(cfg.runs):
        for ci, message in enumerate(messages):
            seed = derive_seed(cfg.seed, _DOMAIN_CHANNEL, variant_idx, snr_idx, run, ci)
            spec = _channel_for(cfg, snr_db, seed)
            session_id = f"{variant}/snr={snr_db}/run={run}/cap={ci}"
            meta = {"variant": variant, "snr_db": snr_db, "run": run,
                    "caption_index": ci, "word_ratio": message.word_ratio,
                    "char_ratio": message.char_ratio}
            jobs.append((message, spec, session_id, meta))
    return jobs


def cmd_sweep_snr(cfg: ExperimentConfig, out_dir: Path) -> None:
    """Survival and character error rates versus SNR, per pipeline variant."""
    rt = _Runtime(cfg)
    captions = load_corpus(cfg.corpus)
    all_rows: list[MetricsRow] = []
    all_traces: list[TransmissionTrace] = []
    for vi, variant in enumerate(cfg.effective_variants()):
        survival_groups, cer_groups = [], []
        for si, snr in enumerate(cfg.snrs):
            jobs = _sweep_jobs(cfg, rt, captions, variant, vi, snr, si)
            traces = _run_sessions(jobs, cfg.workers)
            rows = aggregate(traces)
            final = {r.session_id: r for r in rows}  # per-session final step wins
            finals = [final[t.session_id] for t in traces]
            survival_groups.append((snr, [r.survival_rate for r in finals]))
            cer_groups.append((snr, [r.char_error_rate for r in finals]))
            all_rows.extend(rows)
            all_traces.extend(traces)
        tag = variant.replace("+", "_")
        export_sweep(sweep_from_groups(SweepAxis.SNR, survival_groups),
                     ExportFormat.CSV, out_dir / f"sweep_survival_{tag}.csv")
        export_sweep(sweep_from_groups(SweepAxis.SNR, cer_groups),
                     ExportFormat.CSV, out_dir / f"sweep_cer_{tag}.csv")
        for snr, values in survival_groups:
            mean = sum(values) / len(values)
            print(f"{variant} @ {snr} dB: survival {mean:.4f} over {len(values)} sessions")
    export_rows(all_rows, ExportFormat.CSV, out_dir / "rows.csv")
    if cfg.emit_traces:
        write_trace_jsonl(all_traces, out_dir / "traces.jsonl")


def cmd_sweep_chars(cfg: ExperimentConfig, out_dir: Path) -> None:
    """Per-step metrics indexed by cumulative transmitted characters."""
    rt = _Runtime(cfg)
    captions = load_corpus(cfg.corpus)
    variants = cfg.effective_variants()
    if cfg.include_baselines:
        variants = variants + [v for v in BASELINE_VARIANTS if v not in variants]
    all_rows: list[MetricsRow] = []
    all_traces: list[TransmissionTrace] = []
    for vi, variant in enumerate(variants):
        jobs = _sweep_jobs(cfg, rt, captions, variant, vi, None, 0)
        traces = _run_sessions(jobs, cfg.workers)
        rows = aggregate(traces)
        by_step: dict[int, list[MetricsRow]] = {}
        for r in rows:
            by_step.setdefault(r.t, []).append(r)
        survival_groups, cer_groups = [], []
        for t in sorted(by_step):
            group = by_step[t]
            chars = sum(r.chars_sent for r in group) / len(group)
            survival_groups.append((chars, [r.survival_rate for r in group]))
            cer_groups.append((chars, [r.char_error_rate for r in group]))
        tag = variant.replace("+", "_")
        export_sweep(sweep_from_groups(SweepAxis.CHARS_TRANSMITTED, survival_groups),
                     ExportFormat.CSV, out_dir / f"sweep_chars_survival_{tag}.csv")
        export_sweep(sweep_from_groups(SweepAxis.CHARS_TRANSMITTED, cer_groups),
                     ExportFormat.CSV, out_dir / f"sweep_chars_cer_{tag}.csv")
        all_rows.extend(rows)
        all_traces.extend(traces)
        print(f"{variant}: {len(traces)} sessions, {len(by_step)} steps")
    export_rows(all_rows, ExportFormat.CSV, out_dir / "rows.csv")
    if cfg.emit_traces:
        write_trace_jsonl(all_traces, out_dir / "traces.jsonl")


def cmd_trace(cfg: ExperimentConfig, out_dir: Path, caption_index: int) -> None:
    """Verbose single-session dump for one corpus caption."""
    rt = _Runtime(cfg)
    captions = load_corpus(cfg.corpus)
    if not 0 <= caption_index < len(captions):
        raise ConfigError(f"caption index {caption_index} outside corpus of {len(captions)}")
    message = prepare_message(captions[caption_index], cfg.pipeline, rt, caption_index)
    seed = derive_seed(cfg.seed, _DOMAIN_CHANNEL, 0, 0, 0, caption_index)
    spec = _channel_for(cfg, None, seed)
    meta = {"variant": cfg.pipeline, "caption_index": caption_index,
            "word_ratio": message.word_ratio, "char_ratio": message.char_ratio}
    trace = run_session(message.encoded, spec, session_id=f"trace/cap={caption_index}",
                        meta=meta)
    print(f"caption : {captions[caption_index]}")
    print(f"encoded : {message.encoded.source_text}")
    for step in trace.steps:
        print(f"  t={step.frame_sent.word_index:3d} "
              f"sent={step.frame_sent.payload!r} received={step.frame_received.payload!r} "
              f"prompt={step.receiver_prompt!r}")
    write_trace_jsonl([trace], out_dir / "trace.jsonl")
    export_rows(aggregate([trace]), ExportFormat.CSV, out_dir / "rows.csv")


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # bad flags are config errors: exit 1, not 2
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="semcom", description=__doc__,
                     formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("--config", help="JSON config file; flags override its values")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("compress", "sweep-snr", "sweep-chars", "trace"):
        p = sub.add_parser(name)
        p.add_argument("--config", default=argparse.SUPPRESS,
                       help="JSON config file; flags override its values")
        p.add_argument("--corpus")
        p.add_argument("--pipeline", help="|".join(PIPELINES))
        p.add_argument("--variants", help="comma-separated pipeline list (sweeps)")
        p.add_argument("--runs", type=int)
        p.add_argument("--seed", type=int)
        p.add_argument("--output-dir")
        p.add_argument("--workers", type=int)
        p.add_argument("--snr-db", type=float)
        p.add_argument("--epsilon", type=float)
        p.add_argument("--channel-kind", choices=[k.value for k in ChannelKind])
        p.add_argument("--snrs", help="comma-separated SNR list in dB")
        p.add_argument("--include-baselines", action="store_true", default=None)
        p.add_argument("--no-traces", action="store_true", default=None)
        if name == "trace":
            p.add_argument("--caption-index", type=int, default=0)
    return parser


_FLAG_KEYS = {
    "corpus": "corpus", "pipeline": "pipeline", "runs": "runs", "seed": "seed",
    "output_dir": "output_dir", "workers": "workers", "snr_db": "snr_db",
    "epsilon": "epsilon", "channel_kind": "channel_kind",
    "include_baselines": "include_baselines",
}


def _config_from_args(args: argparse.Namespace) -> ExperimentConfig:
    data: dict = {}
    if getattr(args, "config", None):
        path = Path(args.config)
        if not path.exists():
            raise ConfigError(f"config file not found: {path}")
        try:
            data = json.loads(path.read_text())
        except json.JSONDecodeError as e:
            raise ConfigError(f"config file {path} is not valid JSON: {e}") from e
        if not isinstance(data, dict):
            raise ConfigError("config file must hold a JSON object")
    for attr, key in _FLAG_KEYS.items():
        value = getattr(args, attr, None)
        if value is not None:
            data[key] = value
    if getattr(args, "variants", None):
        data["variants"] = [v.strip() for v in args.variants.split(",") if v.strip()]
    if getattr(args, "snrs", None):
        try:
            data["snrs"] = [float(s) for s in args.snrs.split(",") if s.strip()]
        except ValueError as e:
            raise ConfigError(f"bad --snrs list: {e}") from e
    if getattr(args, "no_traces", None):
        data["emit_traces"] = False
    return ExperimentConfig.from_dict(data)


def main(argv: Sequence[str] | None = None) -> int:
    try:
        args = _build_parser().parse_args(argv)
    except SystemExit as e:  # argparse exits; surface the code to callers
        return int(e.code or 0)
    try:
        cfg = _config_from_args(args)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return 1
    out_dir = Path(cfg.output_dir) / args.command
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
        _write_manifest(cfg, args.command, out_dir)
        if args.command == "compress":
            cmd_compress(cfg, out_dir)
        elif args.command == "sweep-snr":
            cmd_sweep_snr(cfg, out_dir)
        elif args.command == "sweep-chars":
            cmd_sweep_chars(cfg, out_dir)
        else:
            cmd_trace(cfg, out_dir, args.caption_index)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return 1
    except Exception as e:
        print(f"runtime error: {type(e).__name__}: {e}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
