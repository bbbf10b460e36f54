"""Sensitivity of the aggregate score and pair selection to the weight row.

Draws a seeded batch of synthetic component triples (core, evidence,
structure), scores every candidate under each published weight row, and
reports (a) the score spread per row, (b) the rank correlation of each row
against the default row, and (c) how often the selected preference pair
changes when the row changes. Run it directly:

    python3 scripts/weight_sensitivity.py [--candidates 2000] [--seed 7]
"""

from __future__ import annotations

import argparse
import random
import statistics

from ecpo.metrics import spearman
from ecpo.validator import ecpo_score

WEIGHT_ROWS = (
    (0.7, 0.15, 0.15),
    (0.6, 0.2, 0.2),
    (0.5, 0.3, 0.2),
    (0.5, 0.2, 0.3),
    (0.4, 0.3, 0.3),
)

DEFAULT_ROW = (0.5, 0.3, 0.2)


def sample_components(rng: random.Random) -> tuple[float, float, float]:
    # severity-shaped core score: many clean policies, a tail of violations
    core = 1.0 if rng.random() < 0.4 else max(0.0, 1.0 - rng.choice((1, 2, 3, 4)) / 4 - 0.1 * rng.randint(1, 6))
    evidence = rng.random()
    structure = rng.choice((1.0, 0.9, 0.8, 0.7, 0.0))
    return (core, evidence, structure)


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--candidates", type=int, default=2000, help="number of synthetic candidates")
    parser.add_argument("--sets", type=int, default=400, help="number of candidate sets for pair flips")
    parser.add_argument("--set-size", type=int, default=5, help="candidates per set")
    parser.add_argument("--seed", type=int, default=7, help="PRNG seed")
    args = parser.parse_args()

    rng = random.Random(args.seed)
    triples = [sample_components(rng) for _ in range(args.candidates)]
    by_row = {row: [ecpo_score(*t, row) for t in triples] for row in WEIGHT_ROWS}

    print(f"candidates={args.candidates} seed={args.seed}")
    print(f"{'weight row':<18} {'mean':>8} {'stdev':>8} {'rank corr vs default':>22}")
    for row, scores in by_row.items():
        correlation = spearman(scores, by_row[DEFAULT_ROW])
        label = ",".join(f"{w:g}" for w in row)
        corr_text = "1.0000 (self)" if row == DEFAULT_ROW else f"{correlation:.4f}"
        print(f"{label:<18} {statistics.fmean(scores):>8.4f} {statistics.pstdev(scores):>8.4f} {corr_text:>22}")

    flips = {row: 0 for row in WEIGHT_ROWS if row != DEFAULT_ROW}
    for _ in range(args.sets):
        pool = [sample_components(rng) for _ in range(args.set_size)]

        def extremes(row):
            scored = sorted(range(len(pool)), key=lambda i: (-ecpo_score(*pool[i], row), i))
            return (scored[0], scored[-1])

        baseline = extremes(DEFAULT_ROW)
        for row in flips:
            if extremes(row) != baseline:
                flips[row] += 1

    print(f"\npair flips vs default over {args.sets} sets of {args.set_size}:")
    for row, count in flips.items():
        label = ",".join(f"{w:g}" for w in row)
        print(f"  {label:<16} {count:>4} ({100.0 * count / args.sets:.1f}%)")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
