"""Desk-scale experiment: synthetic corpus, ~30 minute training, AWGN/Rayleigh sweep.

Usage::

    python3 scripts/desk_sweep.py                 # full pipeline
    python3 scripts/desk_sweep.py --reuse-model   # skip training if a checkpoint exists

Prints the seed-averaged avg-BLEU table and writes plots under runs/desk/plots.
"""

from __future__ import annotations

import argparse
import logging
import sys
import time
from pathlib import Path

import numpy as np

from semcom import experiment, synth

ROOT = Path(__file__).resolve().parents[1]


def summarize(rows):
    table = experiment.aggregate(rows, "avg_bleu")
    for (scheme, channel), (snrs, values) in sorted(table.items()):
        cells = "  ".join(f"{s:>4.0f} dB {v:.3f}" for s, v in zip(snrs, values))
        print(f"{scheme:>14} {channel:>8}  {cells}")


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--config", default=str(ROOT / "configs" / "desk.ini"))
    ap.add_argument("--corpus-size", type=int, default=6000, help="synthetic sentences to generate")
    ap.add_argument("--reuse-model", action="store_true")
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.INFO, format="%(asctime)s %(message)s")

    cfg = experiment.ExperimentConfig.from_ini(args.config)
    cfg = cfg.with_overrides({"corpus": str(ROOT / cfg.corpus), "output_dir": str(ROOT / cfg.output_dir)})
    corpus_path = Path(cfg.corpus)
    if not corpus_path.exists():
        corpus_path.parent.mkdir(parents=True, exist_ok=True)
        corpus_path.write_text("\n".join(synth.generate(args.corpus_size, seed=0)) + "\n", encoding="utf-8")

    manifest = experiment.prepare(cfg)
    print("prepared:", manifest["counts"], "vocab", manifest["vocab_size"])
    layout = experiment.Layout(cfg.output_dir)
    if not (args.reuse_model and layout.checkpoint.exists()):
        t0 = time.time()
        result = experiment.train_model(cfg)
        tail = np.mean([h["loss"] for h in result.history[-50:]])
        print(f"trained {len(result.history)} steps in {(time.time() - t0) / 60:.1f} min, final loss {tail:.3f}")

    t0 = time.time()
    rows = experiment.sweep(cfg)
    print(f"sweep: {len(rows)} rows in {time.time() - t0:.0f} s")
    summarize(rows)
    experiment.plot_results(layout.results, layout.path("plots"), cfg.schemes)
    return 0


if __name__ == "__main__":
    sys.exit(main())
