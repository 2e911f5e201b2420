#!/usr/bin/env python3
"""End-to-end dry run on a synthetic corpus with mock backends.

Generates layouts, partitions and attends the first sample, scores the corpus
with both metric pipelines, computes label statistics, and joins everything
into a per-sample CSV.  All artifacts land in --out-dir.

Example:
    python3 scripts/synthetic_eval.py --out-dir /tmp/dryrun --count 12 --seed 3
"""

import argparse
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from rgkit.cli import main as rgkit_main  # noqa: E402


def run(*argv) -> None:
    argv = [str(a) for a in argv]
    code = rgkit_main(argv)
    if code != 0:
        raise SystemExit(f"step failed ({code}): rgkit {' '.join(argv)}")


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out-dir", required=True)
    parser.add_argument("--count", type=int, default=12)
    parser.add_argument("--seed", type=int, default=3)
    args = parser.parse_args()

    out = Path(args.out_dir)
    corpus = out / "layouts"
    out.mkdir(parents=True, exist_ok=True)

    run("gen-layouts", "--count", args.count, "--seed", args.seed,
        "--min-objects", 1, "--max-objects", 4, "--out-dir", corpus)
    first = sorted(corpus.glob("*.json"))[0]

    run("partition", "--layout", first, "--grid-h", 16, "--grid-w", 16,
        "--out", out / "partition.json")
    run("attend", "--layout", first, "--grid-h", 16, "--grid-w", 16,
        "--seed", args.seed, "--out-features", out / "attend_features.bin",
        "--out-diag", out / "attend_diag.json")

    run("eval", "cropclip", "--layouts", corpus, "--backend", "mock",
        "--seed", args.seed, "--out-json", out / "cropclip.json",
        "--out-csv", out / "cropclip.csv")
    run("eval", "samiou", "--layouts", corpus, "--backend", "mock",
        "--seed", args.seed, "--out-json", out / "samiou.json",
        "--out-csv", out / "samiou.csv")
    run("eval", "stats", "--layouts", corpus,
        "--out-json", out / "stats.json", "--out-csv", out / "stats.csv")

    run("flops", "--out", out / "flops.csv")
    run("report", "--metrics", out / "cropclip.json", out / "samiou.json",
        "--out", out / "per_sample.csv",
        "--costs", out / "flops.csv", "--costs-out", out / "costs.csv")

    print(f"artifacts in {out}:")
    for path in sorted(out.rglob("*")):
        if path.is_file():
            print(f"  {path.relative_to(out)}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
