#!/usr/bin/env python3
"""Sweep the attention cost model across token counts and emit plot data.

Writes one CSV with analytic FLOPs per variant (optionally with measured wall
times) and prints the regional/extended cost ratio at the 32x32-grid,
640-channel reference point.

Examples:
    python3 scripts/cost_sweep.py --out sweep.csv
    python3 scripts/cost_sweep.py --out sweep.csv --bench --repetitions 20 \
        --channels 64 --attn-dim 64
"""

import argparse
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from rgkit.cost import (  # noqa: E402
    VARIANT_EXTENDED,
    VARIANT_REGIONAL,
    VARIANTS,
    flops,
    sweep_csv,
    sweep_rows,
    two_object_config,
)
from rgkit.fileio import atomic_write_text  # noqa: E402


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--n-tokens", type=int, nargs="+",
                        default=[64, 256, 1024, 4096])
    parser.add_argument("--channels", type=int, default=640)
    parser.add_argument("--attn-dim", type=int, default=640)
    parser.add_argument("--heads", type=int, default=8)
    parser.add_argument("--t-total", type=int, default=77)
    parser.add_argument("--bench", action="store_true",
                        help="also measure wall time per configuration")
    parser.add_argument("--repetitions", type=int, default=20)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--out", required=True)
    args = parser.parse_args()

    configs = [
        two_object_config(
            variant, n_tokens=n, channels=args.channels, attn_dim=args.attn_dim,
            heads=args.heads, t_total=args.t_total,
        )
        for n in args.n_tokens
        for variant in VARIANTS
    ]
    rows = sweep_rows(configs, include_time=args.bench,
                      repetitions=args.repetitions, seed=args.seed)
    atomic_write_text(args.out, sweep_csv(rows))
    print(f"wrote {len(rows)} rows to {args.out}")

    reference = 1024
    regional = flops(two_object_config(
        VARIANT_REGIONAL, reference, channels=args.channels,
        attn_dim=args.attn_dim, heads=args.heads, t_total=args.t_total,
    ))
    extended = flops(two_object_config(
        VARIANT_EXTENDED, reference, channels=args.channels,
        attn_dim=args.attn_dim, heads=args.heads, t_total=args.t_total,
    ))
    print(
        f"N={reference}: regional {regional.total:,} FLOPs vs "
        f"extended {extended.total:,} FLOPs "
        f"(ratio {regional.total / extended.total:.3f})"
    )
    return 0


if __name__ == "__main__":
    sys.exit(main())
