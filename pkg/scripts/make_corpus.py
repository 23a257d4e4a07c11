"""Write a synthetic parliamentary-style corpus, one sentence per line.

Usage::

    python3 scripts/make_corpus.py OUT.txt [--sentences 6000] [--seed 0]

The generator is a stand-in for a real parallel-corpus dump when none is
available; any UTF-8 file with one sentence per line works with ``prepare``.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from semcom import synth


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("out")
    ap.add_argument("--sentences", type=int, default=6000)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)
    path = Path(args.out)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text("\n".join(synth.generate(args.sentences, seed=args.seed)) + "\n", encoding="utf-8")
    print(f"wrote {args.sentences} sentences to {path}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
