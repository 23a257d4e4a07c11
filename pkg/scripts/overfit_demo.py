"""Memorize ten sentences through a noiseless link and print the reconstructions.

Usage::

    python3 scripts/overfit_demo.py [--max-steps 2000] [--seed 0]
"""

from __future__ import annotations

import argparse
import sys

from semcom import overfit


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--max-steps", type=int, default=2000)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)
    result = overfit.run(max_steps=args.max_steps, seed=args.seed)
    for got, want in zip(result.decoded, result.references):
        print("ok  " if got == want else "MISS", " ".join(got))
    print(f"{result.exact}/{len(result.references)} exact after {result.steps} steps, "
          f"loss {result.final_loss:.4f}, {result.seconds:.0f} s")
    return 0 if result.exact == len(result.references) else 1


if __name__ == "__main__":
    sys.exit(main())
