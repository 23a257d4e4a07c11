"""Experiment pipeline behind the command line: prepare, train, sweep, plot.

All artifacts live under ``ExperimentConfig.output_dir``::

    data/     vocab.txt, train.txt, test.txt, manifest.json
    model/    checkpoint.npz, loss.csv
    results/  results.csv, codebook.txt, interleaver.txt, manifest.json
    plots/    <metric>_<channel>.svg
"""

from __future__ import annotations

import configparser
import csv
import dataclasses
import hashlib
import json
import logging
import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Iterable, Sequence

import numpy as np

from . import channel as ch
from . import corpus
from . import eval as ev
from .baseline import HuffmanCodebook, SeparationScheme, TurboCodeConfig, run_chain
from .corpus import DataError, Vocabulary
from .model import ModelConfig, load_checkpoint, save_checkpoint, transmit_batch
from .trainer import TrainConfig, train, write_history

log = logging.getLogger(__name__)

SCHEMES = ("proposed", "huffman_turbo")
METRICS = ("avg_bleu", "similarity")
RESULT_FIELDS = ["scheme", "channel", "snr_db", "bleu1", "bleu2", "bleu3", "bleu4",
                 "avg_bleu", "similarity", "n_sentences", "seed", "config_hash"]
# fields that do not change any result
_HASH_EXCLUDE = {"output_dir", "workers"}


class ConfigError(ValueError):
    """Invalid or inconsistent experiment configuration."""


class ResultsParseError(ValueError):
    """A results CSV row does not match the schema."""


@dataclass
class ExperimentConfig:
    # data
    corpus: str = "corpus.txt"
    min_len: int = 4
    max_len: int = 36
    split_ratio: float = 0.9
    split_seed: int = 0
    vocab_size: int = 22_000
    max_train: int = 0  # 0 keeps every training sentence
    max_test: int = 0
    # model
    d_model: int = 128
    n_heads: int = 8
    n_layers: int = 3
    d_ff: int = 512
    # training
    train_channel: str = "awgn"
    learning_rate: float = 5e-4
    batch_size: int = 256
    epochs: int = 80
    max_steps: int = 0  # 0 means no step limit
    max_minutes: float = 0.0  # 0 means no time limit
    train_seed: int = 0
    word_dropout: float = 0.0
    # sweep
    schemes: tuple = SCHEMES
    channels: tuple = (ch.AWGN,)
    snrs: tuple = (0.0, 3.0, 6.0, 9.0, 12.0, 15.0, 18.0)
    seeds: tuple = (0, 1, 2)
    qam_order: int = 64
    turbo_iterations: int = 5
    eval_batch_size: int = 64
    workers: int = 1
    output_dir: str = "runs/default"

    def __post_init__(self):
        self.schemes = tuple(self.schemes)
        self.channels = tuple(self.channels)
        self.snrs = tuple(float(s) for s in self.snrs)
        self.seeds = tuple(int(s) for s in self.seeds)
        if not self.snrs:
            raise ConfigError("snrs must not be empty")
        if list(self.snrs) != sorted(self.snrs):
            raise ConfigError(f"snrs must be sorted ascending, got {list(self.snrs)}")
        if not self.schemes:
            raise ConfigError("schemes must not be empty")
        for s in self.schemes:
            if s not in SCHEMES:
                raise ConfigError(f"unknown scheme {s!r}; choose from {SCHEMES}")
        for c in self.channels:
            if c not in ch.KINDS:
                raise ConfigError(f"unknown channel {c!r}; choose from {ch.KINDS}")
        if not self.seeds:
            raise ConfigError("seeds must not be empty")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")

    # -- persistence -------------------------------------------------------

    def config_hash(self) -> str:
        payload = {k: v for k, v in dataclasses.asdict(self).items() if k not in _HASH_EXCLUDE}
        blob = json.dumps(payload, sort_keys=True, default=list)
        return hashlib.sha256(blob.encode("utf-8")).hexdigest()[:16]

    def with_overrides(self, overrides: dict[str, str]) -> "ExperimentConfig":
        values = dataclasses.asdict(self)
        for key, raw in overrides.items():
            values[key] = _coerce(key, raw)
        return ExperimentConfig(**values)

    @classmethod
    def from_ini(cls, path) -> "ExperimentConfig":
        """Read an INI file; section names are free-form, keys are field names."""
        parser = configparser.ConfigParser()
        try:
            with open(path, encoding="utf-8") as fh:
                parser.read_file(fh)
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc.strerror}") from exc
        except configparser.Error as exc:
            raise ConfigError(f"{path}: {exc}") from exc
        overrides = {}
        for section in parser.sections():
            for key, raw in parser.items(section):
                overrides[key] = raw
        return cls().with_overrides(overrides)

    def to_ini(self) -> str:
        lines = ["[experiment]"]
        for f in dataclasses.fields(self):
            value = getattr(self, f.name)
            text = ", ".join(_fmt(v) for v in value) if isinstance(value, tuple) else _fmt(value)
            lines.append(f"{f.name} = {text}")
        return "\n".join(lines) + "\n"

    # -- derived objects ---------------------------------------------------

    def model_config(self, vocab_size: int) -> ModelConfig:
        return ModelConfig(vocab_size=vocab_size, d_model=self.d_model, n_heads=self.n_heads,
                           n_layers=self.n_layers, d_ff=self.d_ff)

    def train_config(self, checkpoint_path=None) -> TrainConfig:
        return TrainConfig(learning_rate=self.learning_rate, batch_size=self.batch_size,
                           epochs=self.epochs, channel=self.train_channel, seed=self.train_seed,
                           max_steps=self.max_steps or None, word_dropout=self.word_dropout,
                           max_seconds=self.max_minutes * 60 if self.max_minutes else None,
                           checkpoint_path=checkpoint_path)


_FIELD_TYPES = {f.name: type(f.default) if f.default is not dataclasses.MISSING else str
                for f in dataclasses.fields(ExperimentConfig)}


def _fmt(v) -> str:
    return repr(v) if isinstance(v, float) else str(v)


def _coerce(key: str, raw):
    if key not in _FIELD_TYPES:
        raise ConfigError(f"unknown config key {key!r}")
    if not isinstance(raw, str):
        return raw
    kind = _FIELD_TYPES[key]
    try:
        if kind is tuple:
            items = [x.strip() for x in raw.split(",") if x.strip()]
            elem = {"snrs": float, "seeds": int}.get(key, str)
            return tuple(elem(x) for x in items)
        if kind is int:
            return int(raw)
        if kind is float:
            return float(raw)
    except ValueError as exc:
        raise ConfigError(f"bad value for {key}: {raw!r}") from exc
    return raw


# ---------------------------------------------------------------------------
# paths


class Layout:
    """Resolves artifact paths and refuses any path outside the output directory."""

    def __init__(self, output_dir):
        self.root = Path(output_dir).resolve()

    def path(self, *parts) -> Path:
        p = self.root.joinpath(*parts).resolve()
        if p != self.root and self.root not in p.parents:
            raise ConfigError(f"refusing to write outside {self.root}: {p}")
        return p

    def ensure(self, *parts) -> Path:
        p = self.path(*parts)
        p.parent.mkdir(parents=True, exist_ok=True)
        return p

    @property
    def vocab(self):
        return self.path("data", "vocab.txt")

    @property
    def train_split(self):
        return self.path("data", "train.txt")

    @property
    def test_split(self):
        return self.path("data", "test.txt")

    @property
    def checkpoint(self):
        return self.path("model", "checkpoint.npz")

    @property
    def results(self):
        return self.path("results", "results.csv")


def _write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _write_lines(path: Path, sentences: Iterable[Sequence[str]]) -> None:
    path.write_text("".join(" ".join(s) + "\n" for s in sentences), encoding="utf-8")


def _read_split(path: Path) -> list[list[str]]:
    if not path.exists():
        raise ConfigError(f"{path} is missing; run 'prepare' first")
    return [line.split() for line in path.read_text(encoding="utf-8").splitlines() if line.strip()]


# ---------------------------------------------------------------------------
# prepare / train


def prepare(cfg: ExperimentConfig) -> dict:
    """Filter and split the corpus, build the vocabulary, write a manifest."""
    layout = Layout(cfg.output_dir)
    lines = corpus.read_lines(cfg.corpus)
    if not lines:
        raise DataError(f"corpus {cfg.corpus} is empty")
    tokenized = [corpus.tokenize(s) for s in lines]
    in_window = sum(cfg.min_len <= len(t) <= cfg.max_len for t in tokenized)
    train_set, test_set = corpus.filter_and_split(lines, cfg.min_len, cfg.max_len,
                                                  cfg.split_ratio, cfg.split_seed)
    if cfg.max_train:
        train_set = train_set[:cfg.max_train]
    if cfg.max_test:
        test_set = test_set[:cfg.max_test]
    vocab = Vocabulary.build(train_set, cfg.vocab_size)
    vocab.save(layout.ensure("data", "vocab.txt"))
    _write_lines(layout.ensure("data", "train.txt"), train_set)
    _write_lines(layout.ensure("data", "test.txt"), test_set)
    manifest = {
        "config_hash": cfg.config_hash(),
        "counts": {"read": len(lines), "in_window": in_window,
                   "out_of_window": len(lines) - in_window,
                   "train": len(train_set), "test": len(test_set)},
        "vocab_size": len(vocab),
        "length_window": [cfg.min_len, cfg.max_len],
    }
    _write_json(layout.ensure("data", "manifest.json"), manifest)
    return manifest


def train_model(cfg: ExperimentConfig):
    """Train on the prepared split; writes the checkpoint and the loss history."""
    layout = Layout(cfg.output_dir)
    vocab = Vocabulary.load(_require(layout.vocab))
    sentences = _read_split(layout.train_split)
    model_cfg = cfg.model_config(len(vocab))
    ckpt = layout.ensure("model", "checkpoint.npz")
    result = train(sentences, vocab, model_cfg, cfg.train_config(str(ckpt)))
    save_checkpoint(ckpt, result.params, model_cfg,
                    {"config_hash": cfg.config_hash(), "steps": len(result.history)})
    write_history(layout.ensure("model", "loss.csv"), result.history)
    return result


def _require(path: Path) -> Path:
    if not path.exists():
        raise ConfigError(f"{path} is missing; run the earlier pipeline stage first")
    return path


# ---------------------------------------------------------------------------
# sweep


@dataclass(frozen=True)
class SweepPoint:
    scheme: str
    channel: str
    snr_db: float
    seed: int


def sweep_points(cfg: ExperimentConfig) -> list[SweepPoint]:
    return [SweepPoint(s, c, snr, seed) for s in cfg.schemes for c in cfg.channels
            for snr in cfg.snrs for seed in cfg.seeds]


def transmit_proposed(params, model_cfg: ModelConfig, vocab: Vocabulary,
                      sentences: Sequence[Sequence[str]], kind: str, snr_db: float,
                      seed: int, batch_size: int = 64) -> list[list[str]]:
    """Send sentences through the learned transceiver; one fading block per sentence."""
    out = []
    for i, start in enumerate(range(0, len(sentences), batch_size)):
        batch = corpus.make_batch(sentences[start:start + batch_size], vocab)
        real = ch.ChannelRealization.draw(kind, snr_db, batch.size, seed=seed, stream=i)
        ids = transmit_batch(params, model_cfg, batch, real)
        out.extend(vocab.decode(row) for row in ids)
    return out


def score_row(point: SweepPoint, candidates, references, provider, config_hash: str) -> dict:
    report, sim = ev.score_corpus(candidates, references, provider)
    row = {"scheme": point.scheme, "channel": point.channel, "snr_db": point.snr_db}
    row.update(report.as_dict())
    row.update({"similarity": sim, "n_sentences": report.n_sentences, "seed": point.seed,
                "config_hash": config_hash})
    return row


def run_points(points: Sequence[SweepPoint], job: Callable[[SweepPoint], dict],
               emit: Callable[[dict], None], workers: int = 1) -> None:
    """Run jobs on a bounded pool; ``emit`` is called from this thread only, in point order."""
    with ThreadPoolExecutor(max_workers=workers) as pool:
        for row in pool.map(job, points):
            emit(row)


def sweep(cfg: ExperimentConfig, provider=None) -> list[dict]:
    """Evaluate every (scheme, channel, SNR, seed) point and write the results CSV."""
    layout = Layout(cfg.output_dir)
    vocab = Vocabulary.load(_require(layout.vocab))
    test_set = _read_split(layout.test_split)
    if not test_set:
        raise DataError("test split is empty")
    config_hash = cfg.config_hash()
    provider = provider or ev.provider_from_env()
    jobs = {}
    if "proposed" in cfg.schemes:
        if not layout.checkpoint.exists():
            raise ConfigError(f"checkpoint {layout.checkpoint} is missing; run 'train' first")
        params, model_cfg, _ = load_checkpoint(layout.checkpoint)
        jobs["proposed"] = lambda p: transmit_proposed(params, model_cfg, vocab, test_set, p.channel,
                                                       p.snr_db, p.seed, cfg.eval_batch_size)
    if "huffman_turbo" in cfg.schemes:
        codebook = HuffmanCodebook.build(_read_split(layout.train_split))
        scheme = SeparationScheme(codebook, TurboCodeConfig(iterations=cfg.turbo_iterations),
                                  cfg.qam_order)
        codebook.save(layout.ensure("results", "codebook.txt"))
        scheme.turbo.save(layout.ensure("results", "interleaver.txt"))
        jobs["huffman_turbo"] = lambda p: run_chain(test_set, scheme, p.channel, p.snr_db, seed=p.seed)

    def job(point: SweepPoint) -> dict:
        row = score_row(point, jobs[point.scheme](point), test_set, provider, config_hash)
        log.info("%s %s %.1f dB seed %d: avg BLEU %.3f", point.scheme, point.channel,
                 point.snr_db, point.seed, row["avg_bleu"])
        return row

    rows: list[dict] = []
    path = layout.ensure("results", "results.csv")
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=RESULT_FIELDS, lineterminator="\n")
        writer.writeheader()

        def emit(row):
            writer.writerow({k: _csv_value(row[k]) for k in RESULT_FIELDS})
            fh.flush()
            rows.append(row)

        run_points(sweep_points(cfg), job, emit, cfg.workers)
    mean_tokens = float(np.mean([len(s) for s in test_set]))
    manifest = {"config_hash": config_hash, "rows": len(rows), "test_sentences": len(test_set),
                "similarity_provider": getattr(provider, "kind", type(provider).__name__),
                "proposed_symbols_per_word": 8,
                "huffman_turbo_symbols_per_sentence":
                    _mean_baseline_symbols(cfg, layout, test_set) if "huffman_turbo" in jobs else None,
                "mean_words_per_sentence": mean_tokens}
    _write_json(layout.ensure("results", "manifest.json"), manifest)
    return rows


def _mean_baseline_symbols(cfg, layout, test_set) -> float:
    codebook = HuffmanCodebook.load(layout.path("results", "codebook.txt"))
    scheme = SeparationScheme(codebook, TurboCodeConfig(iterations=cfg.turbo_iterations), cfg.qam_order)
    return float(np.mean([scheme.symbols_per_sentence(s) for s in test_set]))


def _csv_value(v):
    return repr(float(v)) if isinstance(v, (float, np.floating)) else v


# ---------------------------------------------------------------------------
# results IO and plots


def read_results(path) -> list[dict]:
    """Parse a results CSV, validating every row; errors carry the line number."""
    rows = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise ResultsParseError(f"{path}:1: empty file")
        missing = [f for f in RESULT_FIELDS if f not in header]
        if missing:
            raise ResultsParseError(f"{path}:1: header lacks columns {missing}")
        for values in reader:
            lineno = reader.line_num
            if not values:
                continue
            if len(values) != len(header):
                raise ResultsParseError(f"{path}:{lineno}: expected {len(header)} fields, got {len(values)}")
            raw = dict(zip(header, values))
            try:
                row = {"scheme": raw["scheme"], "channel": raw["channel"], "snr_db": float(raw["snr_db"]),
                       "n_sentences": int(raw["n_sentences"]), "seed": int(raw["seed"]),
                       "config_hash": raw["config_hash"]}
                for key in ("bleu1", "bleu2", "bleu3", "bleu4", "avg_bleu", "similarity"):
                    row[key] = float(raw[key])
            except ValueError as exc:
                raise ResultsParseError(f"{path}:{lineno}: {exc}") from exc
            rows.append(row)
    return rows


def aggregate(rows: Sequence[dict], metric: str) -> dict:
    """``{(scheme, channel): (snrs, seed-mean values)}`` ignoring NaN values."""
    buckets: dict = {}
    for r in rows:
        if math.isnan(r[metric]):
            continue
        buckets.setdefault((r["scheme"], r["channel"]), {}).setdefault(r["snr_db"], []).append(r[metric])
    out = {}
    for key, by_snr in buckets.items():
        snrs = sorted(by_snr)
        out[key] = (snrs, [float(np.mean(by_snr[s])) for s in snrs])
    return out


_LABELS = {"avg_bleu": "Average BLEU (1-4 gram)", "similarity": "Sentence similarity"}
_SCHEME_NAMES = {"proposed": "Proposed (dual attention)", "huffman_turbo": "Huffman + Turbo"}


def plot_results(csv_path, out_dir, schemes: Sequence[str] | None = None) -> list[Path]:
    """One SVG per (metric, channel); series per scheme averaged over seeds.

    Output is byte-identical for identical input.
    """
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    rows = read_results(csv_path)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    channels = sorted({r["channel"] for r in rows})
    schemes = list(schemes) if schemes else sorted({r["scheme"] for r in rows})
    written = []
    with matplotlib.rc_context({"svg.hashsalt": "semcom", "svg.fonttype": "none"}):
        for metric in METRICS:
            series = aggregate(rows, metric)
            for channel in channels:
                fig, ax = plt.subplots(figsize=(5, 3.6))
                plotted = 0
                for scheme in schemes:
                    if (scheme, channel) not in series:
                        warnings.warn(f"no {metric} data for {scheme} over {channel}; series omitted",
                                      stacklevel=2)
                        continue
                    snrs, values = series[(scheme, channel)]
                    ax.plot(snrs, values, marker="o", label=_SCHEME_NAMES.get(scheme, scheme))
                    plotted += 1
                ax.set_xlabel("SNR (dB)")
                ax.set_ylabel(_LABELS[metric])
                ax.set_title(f"{channel.upper()} channel")
                ax.set_ylim(0, 1.02)
                ax.grid(True, alpha=0.3)
                if plotted:
                    ax.legend(loc="lower right")
                path = out_dir / f"{metric}_{channel}.svg"
                fig.savefig(path, format="svg", metadata={"Date": None, "Creator": None})
                plt.close(fig)
                written.append(path)
    return written
