#!/usr/bin/env python3
"""Ablation harness: train the fusion-mode x refinement-depth grid on one
corpus with one seed and print the comparison table.

Example:
    python scripts/run_ablation.py --corpus corpus.jsonl --seed 7 \
        --epochs 10 --out-dir ablation_out
"""

import argparse
import sys

from depfuse.pipeline import RunConfig, run_ablation


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--corpus", required=True)
    parser.add_argument("--out-dir", default="ablation_out")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--epochs", type=int, default=10)
    parser.add_argument("--lr", type=float, default=1e-3, dest="learning_rate")
    parser.add_argument("--batch-size", type=int, default=8)
    parser.add_argument("--max-len", type=int, default=256)
    parser.add_argument("--ratio", type=float, default=0.8)
    args = parser.parse_args(argv)

    config = RunConfig(
        corpus=args.corpus,
        out_dir=args.out_dir,
        seed=args.seed,
        epochs=args.epochs,
        learning_rate=args.learning_rate,
        batch_size=args.batch_size,
        max_len=args.max_len,
        ratio=args.ratio,
    )
    results = run_ablation(config)
    width = max(len(name) for name, _ in results)
    print(f"{'variant':<{width}}  accuracy  precision  recall    f1")
    for name, rep in results:
        print(
            f"{name:<{width}}  {rep.accuracy:.6f}  {rep.precision:.6f}"
            f"   {rep.recall:.6f}  {rep.f1:.6f}"
        )
    print(f"per-variant artifacts and summary.csv written under {args.out_dir}/")
    return 0


if __name__ == "__main__":
    sys.exit(main())
