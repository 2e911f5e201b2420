"""Command-line surface tying the toolkit together.

Exit codes: 0 success, 1 usage or I/O failure, 2 validation or data error.
Every command is deterministic given its flags and seed; the seed comes from
--seed or the RGK_SEED environment variable.  Outputs are written atomically.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from . import __version__
from .attention import MODES, AttentionState, FeatureMap, regional_forward
from .cost import (
    SWEEP_COLUMNS,
    VARIANTS,
    config_from_layout,
    default_sweep_configs,
    sweep_csv,
    sweep_rows,
    two_object_config,
)
from .fileio import (
    LayoutFormatError,
    atomic_write_text,
    canonical_json,
    load_embedding_json,
    load_layout,
    mask_from_pgm,
    read_features,
    read_ppm,
    save_layout,
    write_features,
)
from .grounding import HashEmbedder
from .layout import TokenGrid, validate_layout
from .metrics import (
    FileEmbedder,
    FileSegmenter,
    BoxFillSegmenter,
    ImageRaster,
    MockEmbedder,
    corpus_mean,
    crop_clip_score,
    report_to_dict,
    sam_iou_score,
)
from .regions import partition_to_dict, reorganize
from .synth import generate_layouts
from .textstats import bucket_descriptions, text_stats

PROG = "rgkit"


class UsageError(Exception):
    """Bad invocation or missing input; maps to exit code 1."""


class DataError(Exception):
    """Invalid layout or inconsistent data; maps to exit code 2."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse default exits with 2; we reserve that
        raise UsageError(message)


def _resolve_seed(value: int | None) -> int:
    if value is not None:
        return value
    env = os.environ.get("RGK_SEED")
    if env is not None:
        try:
            return int(env)
        except ValueError:
            raise UsageError(f"RGK_SEED must be an integer, got {env!r}") from None
    raise UsageError("a seed is required: pass --seed or set RGK_SEED")


def _load_valid_layout(path: str, strict: bool = True):
    layout = load_layout(path, strict=strict)
    violations = validate_layout(layout)
    if violations:
        lines = "; ".join(
            f"object {v.object_id}: {v.rule}" if v.object_id is not None else v.rule
            for v in violations
        )
        raise DataError(f"{path}: invalid layout: {lines}")
    return layout


# --- commands ----------------------------------------------------------------

def cmd_partition(args) -> int:
    layout = _load_valid_layout(args.layout, strict=not args.lenient)
    grid = TokenGrid(args.grid_h, args.grid_w)
    partition = reorganize(layout, grid)
    text = canonical_json(partition_to_dict(partition))
    if args.out:
        atomic_write_text(args.out, text)
    else:
        sys.stdout.write(text)
    return 0


@dataclass(frozen=True)
class RunConfig:
    """Resolved settings of one attention run, echoed into the diagnostics."""

    seed: int
    mode: str
    channels: int
    attn_dim: int
    heads: int
    text_dim: int
    box_dim: int
    zero_init: bool


def cmd_attend(args) -> int:
    config = RunConfig(
        seed=_resolve_seed(args.seed),
        mode=args.mode,
        channels=args.channels,
        attn_dim=args.attn_dim,
        heads=args.heads,
        text_dim=args.text_dim,
        box_dim=args.box_dim,
        zero_init=bool(args.zero_init),
    )
    layout = _load_valid_layout(args.layout, strict=not args.lenient)
    state = AttentionState.create(
        channels=config.channels,
        attn_dim=config.attn_dim,
        heads=config.heads,
        text_dim=config.text_dim,
        box_dim=config.box_dim,
        seed=config.seed,
        zero_output=config.zero_init,
    )
    embedder = HashEmbedder(config.text_dim, seed=config.seed)
    if args.features:
        grid, data = read_features(args.features)
        if data.shape[1] != config.channels:
            raise DataError(
                f"{args.features}: has {data.shape[1]} channels, expected {config.channels}"
            )
        features = FeatureMap(grid=grid, data=data)
    else:
        grid = TokenGrid(args.grid_h, args.grid_w)
        features = FeatureMap.random(grid, config.channels, seed=config.seed)
    out = regional_forward(features, layout, state, embedder, mode=config.mode)
    write_features(args.out_features, out.grid, out.data)
    diag = {
        **asdict(config),
        "grid": {"height": out.grid.height, "width": out.grid.width},
        "regions": [
            {
                "covering": [int(i) for i in d.covering],
                "n_tokens": d.n_tokens,
                "seq_len": d.seq_len,
            }
            for d in out.diagnostics
        ],
    }
    atomic_write_text(args.out_diag, canonical_json(diag))
    return 0


def _load_vocab_file(path: str) -> dict[tuple[str, str], tuple[str, ...]]:
    """JSON map {"<complexity>/<length>": [labels...]} into generator form."""
    with open(path, "r", encoding="utf-8") as handle:
        raw = json.load(handle)
    if not isinstance(raw, dict) or not raw:
        raise DataError(f"{path}: vocab file must hold a non-empty JSON object")
    vocab: dict[tuple[str, str], tuple[str, ...]] = {}
    for key, labels in raw.items():
        parts = key.split("/")
        if len(parts) != 2 or not labels:
            raise DataError(f"{path}: bad vocab bucket {key!r}")
        if not all(isinstance(v, str) and v.strip() for v in labels):
            raise DataError(f"{path}: bucket {key!r} holds non-string or empty labels")
        vocab[(parts[0], parts[1])] = tuple(labels)
    return vocab


def cmd_gen_layouts(args) -> int:
    seed = _resolve_seed(args.seed)
    vocabulary = _load_vocab_file(args.vocab_file) if args.vocab_file else None
    layouts = generate_layouts(
        count=args.count,
        seed=seed,
        min_objects=args.min_objects,
        max_objects=args.max_objects,
        overlap_bias=args.overlap_bias,
        vocabulary=vocabulary,
    )
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    for i, layout in enumerate(layouts):
        save_layout(out_dir / f"layout_{i:04d}.json", layout)
    return 0


def _cost_configs(args):
    if args.layout:
        layout = _load_valid_layout(args.layout)
        grid = TokenGrid(args.grid_h, args.grid_w)
        return [
            config_from_layout(
                layout,
                grid,
                variant,
                channels=args.channels,
                attn_dim=args.attn_dim,
                heads=args.heads,
                t_total=args.t_total,
            )
            for variant in args.variants
        ]
    if args.n_tokens:
        return [
            two_object_config(
                variant,
                n_tokens=n,
                channels=args.channels,
                attn_dim=args.attn_dim,
                heads=args.heads,
                t_total=args.t_total or 77,
            )
            for n in args.n_tokens
            for variant in args.variants
        ]
    return default_sweep_configs(args.variants)


def cmd_flops(args) -> int:
    rows = sweep_rows(_cost_configs(args))
    text = sweep_csv(rows)
    if args.out:
        atomic_write_text(args.out, text)
    else:
        sys.stdout.write(text)
    return 0


def cmd_bench(args) -> int:
    seed = _resolve_seed(args.seed)
    if args.repetitions < 1:
        raise UsageError("--repetitions must be >= 1")
    rows = sweep_rows(
        _cost_configs(args), include_time=True, repetitions=args.repetitions, seed=seed
    )
    text = sweep_csv(rows)
    if args.out:
        atomic_write_text(args.out, text)
    else:
        sys.stdout.write(text)
    return 0


def _layout_paths(args) -> list[Path]:
    paths: list[Path] = []
    for item in args.layouts:
        p = Path(item)
        if p.is_dir():
            paths.extend(sorted(p.glob("*.json")))
        else:
            paths.append(p)
    if not paths:
        raise UsageError("no layout files given")
    return paths


def _eval_image(path: Path, layout, args, index: int) -> ImageRaster:
    sample_id = path.stem
    if args.images_dir:
        ppm = Path(args.images_dir) / f"{sample_id}.ppm"
        pixels = read_ppm(ppm)
        return ImageRaster(
            width=pixels.shape[1], height=pixels.shape[0], pixels=pixels, ref=sample_id
        )
    if args.backend == "mock":
        seed = _resolve_seed(args.seed)
        rng_seed = [seed, index]
        rng = np.random.default_rng(rng_seed)
        pixels = rng.integers(
            0, 256, size=(layout.image_height, layout.image_width, 3), dtype=np.uint8
        )
        return ImageRaster(
            width=layout.image_width,
            height=layout.image_height,
            pixels=pixels,
            ref=sample_id,
        )
    # files backend scores from precomputed tables; pixels are not needed
    return ImageRaster(
        width=layout.image_width, height=layout.image_height, pixels=None, ref=sample_id
    )


def _write_metric_outputs(args, metric: str, reports) -> None:
    payload = {
        "metric": metric,
        "lower": args.lower,
        "upper": args.upper,
        "corpus_mean": corpus_mean(reports),
        "samples": [report_to_dict(r) for r in reports],
    }
    if args.out_json:
        atomic_write_text(args.out_json, canonical_json(payload))
    if args.out_csv:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(
            ["sample_id", "object_id", "label", "area_fraction", "filtered", "reason", "score"]
        )
        for report in reports:
            for o in report.objects:
                writer.writerow(
                    [
                        report.sample_id,
                        o.object_id,
                        o.label,
                        format(o.area_fraction, ".9g"),
                        int(o.filtered),
                        o.reason or "",
                        "" if o.score is None else format(o.score, ".9g"),
                    ]
                )
        atomic_write_text(args.out_csv, buf.getvalue())
    if not args.out_json and not args.out_csv:
        sys.stdout.write(canonical_json(payload))


def cmd_eval_cropclip(args) -> int:
    paths = _layout_paths(args)
    if args.backend == "files":
        if not args.embeddings:
            raise UsageError("--backend files requires --embeddings")
        embedder = FileEmbedder(load_embedding_json(args.embeddings))
    else:
        embedder = MockEmbedder(seed=0)
    reports = []
    for index, path in enumerate(paths):
        layout = _load_valid_layout(str(path), strict=not args.lenient)
        image = _eval_image(path, layout, args, index)
        reports.append(
            crop_clip_score(
                image, layout, embedder, lower=args.lower, upper=args.upper,
                sample_id=path.stem,
            )
        )
    _write_metric_outputs(args, "cropclip", reports)
    return 0


def _load_masks_dir(masks_dir: str) -> dict[str, np.ndarray]:
    masks = {}
    for path in sorted(Path(masks_dir).glob("*.pgm")):
        stem = path.stem
        if "_obj" not in stem:
            continue
        sample, _, obj = stem.rpartition("_obj")
        try:
            key = f"{sample}/{int(obj)}"
        except ValueError:
            continue
        masks[key] = mask_from_pgm(path)
    return masks


def cmd_eval_samiou(args) -> int:
    paths = _layout_paths(args)
    if args.backend == "files":
        if not args.masks_dir:
            raise UsageError("--backend files requires --masks-dir")
        segmenter = FileSegmenter(_load_masks_dir(args.masks_dir))
    else:
        segmenter = BoxFillSegmenter()
    reports = []
    for index, path in enumerate(paths):
        layout = _load_valid_layout(str(path), strict=not args.lenient)
        image = _eval_image(path, layout, args, index)
        reports.append(
            sam_iou_score(
                image, layout, segmenter, lower=args.lower, upper=args.upper,
                sample_id=path.stem,
            )
        )
    _write_metric_outputs(args, "samiou", reports)
    return 0


def cmd_eval_stats(args) -> int:
    paths = _layout_paths(args)
    rows = []
    labels = []
    for path in paths:
        layout = _load_valid_layout(str(path), strict=not args.lenient)
        for obj in layout.objects:
            labels.append(obj.text)
            rows.append((path.stem, obj.id, obj.text))
    stats = text_stats(labels)
    buckets = bucket_descriptions(labels)
    histogram: dict[str, int] = {}
    for complexity, length in buckets:
        key = f"{complexity}/{length}"
        histogram[key] = histogram.get(key, 0) + 1
    payload = {
        "n_labels": stats.n_samples,
        "avg_length": stats.avg_length,
        "avg_fog": stats.avg_fog,
        "avg_unique_words": stats.avg_unique_words,
        "buckets": histogram,
    }
    if args.out_json:
        atomic_write_text(args.out_json, canonical_json(payload))
    if args.out_csv:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(
            ["sample_id", "object_id", "label", "words", "fog", "unique_words",
             "complexity", "length_bucket"]
        )
        per_label = zip(stats.lengths, stats.fogs, stats.unique_counts)
        for (sample_id, object_id, label), (complexity, length), (words, fog, unique) in zip(
            rows, buckets, per_label
        ):
            writer.writerow(
                [sample_id, object_id, label, words, format(fog, ".9g"),
                 unique, complexity, length]
            )
        atomic_write_text(args.out_csv, buf.getvalue())
    if not args.out_json and not args.out_csv:
        sys.stdout.write(canonical_json(payload))
    return 0


def cmd_report(args) -> int:
    merged: dict[str, dict[str, float | None]] = {}
    metrics_seen: list[str] = []
    for path in args.metrics:
        with open(path, "r", encoding="utf-8") as handle:
            payload = json.load(handle)
        metric = payload.get("metric")
        if not metric:
            raise DataError(f"{path}: missing metric name")
        if metric not in metrics_seen:
            metrics_seen.append(metric)
        for sample in payload.get("samples", []):
            sample_id = sample.get("sample_id")
            if sample_id is None:
                raise DataError(f"{path}: sample without sample_id")
            row = merged.setdefault(sample_id, {})
            if metric in row:
                raise DataError(
                    f"conflicting entries for sample {sample_id!r}, metric {metric!r}"
                )
            row[metric] = sample.get("sample_mean")
    columns = ["sample_id"] + sorted(metrics_seen)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for sample_id in sorted(merged):
        row = [sample_id]
        for metric in columns[1:]:
            value = merged[sample_id].get(metric)
            row.append("" if value is None else format(value, ".9g"))
        writer.writerow(row)
    atomic_write_text(args.out, buf.getvalue())

    if args.costs:
        if not args.costs_out:
            raise UsageError("--costs requires --costs-out")
        rows = []
        for path in args.costs:
            with open(path, "r", encoding="utf-8", newline="") as handle:
                reader = csv.DictReader(handle)
                if tuple(reader.fieldnames or ()) != SWEEP_COLUMNS:
                    raise DataError(f"{path}: unexpected cost CSV columns {reader.fieldnames}")
                rows.extend(reader)
        buf = io.StringIO()
        writer = csv.DictWriter(buf, fieldnames=SWEEP_COLUMNS, lineterminator="\n")
        writer.writeheader()
        for row in rows:
            writer.writerow(row)
        atomic_write_text(args.costs_out, buf.getvalue())
    return 0


# --- parser ------------------------------------------------------------------

def _add_layout_args(p, single: bool = True) -> None:
    if single:
        p.add_argument("--layout", required=True, help="layout JSON file")
    else:
        p.add_argument(
            "--layouts", nargs="+", required=True,
            help="layout JSON files or directories of them",
        )
    p.add_argument(
        "--lenient", action="store_true",
        help="warn on unknown layout fields instead of failing",
    )


def _add_grid_args(p) -> None:
    p.add_argument("--grid-h", type=int, default=32, help="token grid height")
    p.add_argument("--grid-w", type=int, default=32, help="token grid width")


def _add_cost_args(p) -> None:
    p.add_argument("--n-tokens", type=int, nargs="*", help="visual token counts to sweep")
    p.add_argument("--channels", type=int, default=640)
    p.add_argument("--attn-dim", type=int, default=640)
    p.add_argument("--heads", type=int, default=8)
    p.add_argument("--t-total", type=int, default=None, help="total grounded text tokens")
    p.add_argument("--variants", nargs="+", choices=VARIANTS, default=list(VARIANTS))
    p.add_argument("--layout", help="derive region sizes from this layout instead")
    _add_grid_args(p)
    p.add_argument("--out", help="output CSV path (default: stdout)")


def _add_eval_common(p) -> None:
    _add_layout_args(p, single=False)
    p.add_argument("--backend", choices=["mock", "files"], default="mock")
    p.add_argument("--images-dir", help="directory of <sample>.ppm images")
    p.add_argument("--lower", type=float, default=0.05, help="minimum area fraction")
    p.add_argument("--upper", type=float, default=0.5, help="maximum area fraction")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out-json")
    p.add_argument("--out-csv")


def build_parser() -> _Parser:
    parser = _Parser(prog=PROG, description=__doc__)
    parser.add_argument("--version", action="version", version=f"{PROG} {__version__}")
    parser.add_argument(
        "--help-json", action="store_true", help="print a machine-readable command summary"
    )
    sub = parser.add_subparsers(dest="command")

    p = sub.add_parser("partition", help="reorganize a layout into token-grid regions")
    _add_layout_args(p)
    _add_grid_args(p)
    p.add_argument("--out", help="output JSON path (default: stdout)")
    p.set_defaults(func=cmd_partition)

    p = sub.add_parser("attend", help="run regional cross-attention over a layout")
    _add_layout_args(p)
    _add_grid_args(p)
    p.add_argument("--mode", choices=MODES, default="full")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--channels", type=int, default=64)
    p.add_argument("--attn-dim", type=int, default=64)
    p.add_argument("--heads", type=int, default=4)
    p.add_argument("--text-dim", type=int, default=64)
    p.add_argument("--box-dim", type=int, default=32)
    p.add_argument("--features", help="input feature binary (default: seeded random)")
    p.add_argument(
        "--zero-init", action="store_true",
        help="zero the output projection (fresh-layer identity)",
    )
    p.add_argument("--out-features", required=True)
    p.add_argument("--out-diag", required=True)
    p.set_defaults(func=cmd_attend)

    p = sub.add_parser("gen-layouts", help="generate a synthetic layout corpus")
    p.add_argument("--count", type=int, required=True)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--min-objects", type=int, default=1)
    p.add_argument("--max-objects", type=int, default=5)
    p.add_argument("--overlap-bias", type=float, default=0.35)
    p.add_argument(
        "--vocab-file",
        help='JSON label vocabulary {"<complexity>/<length>": [labels...]}; '
             "bundled vocabulary when omitted",
    )
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_gen_layouts)

    p = sub.add_parser("flops", help="analytic attention cost comparison")
    _add_cost_args(p)
    p.set_defaults(func=cmd_flops)

    p = sub.add_parser("bench", help="microbenchmark the attention variants")
    _add_cost_args(p)
    p.add_argument("--repetitions", type=int, default=20)
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("eval", help="metric pipelines over generated samples")
    esub = p.add_subparsers(dest="eval_command")

    pe = esub.add_parser("cropclip", help="object-label alignment via cropped embeddings")
    _add_eval_common(pe)
    pe.add_argument("--embeddings", help="JSON embedding table for --backend files")
    pe.set_defaults(func=cmd_eval_cropclip)

    pe = esub.add_parser("samiou", help="layout fidelity via mask circumscribed boxes")
    _add_eval_common(pe)
    pe.add_argument("--masks-dir", help="directory of <sample>_obj<i>.pgm masks")
    pe.set_defaults(func=cmd_eval_samiou)

    pe = esub.add_parser("stats", help="label text statistics and buckets")
    _add_layout_args(pe, single=False)
    pe.add_argument("--out-json")
    pe.add_argument("--out-csv")
    pe.set_defaults(func=cmd_eval_stats)

    p = sub.add_parser("report", help="merge metric reports and cost sweeps into CSV")
    p.add_argument("--metrics", nargs="+", required=True, help="eval JSON outputs")
    p.add_argument("--out", required=True)
    p.add_argument("--costs", nargs="*", default=[], help="cost sweep CSVs to merge")
    p.add_argument("--costs-out", help="merged cost CSV path")
    p.set_defaults(func=cmd_report)

    return parser


def _help_json(parser: _Parser) -> dict:
    def describe(p: argparse.ArgumentParser) -> dict:
        options = []
        commands = {}
        for action in p._actions:
            if isinstance(action, argparse._SubParsersAction):
                for name, sub in sorted(action.choices.items()):
                    commands[name] = describe(sub)
            elif action.option_strings:
                options.append(
                    {
                        "flags": list(action.option_strings),
                        "required": bool(action.required),
                        "help": action.help or "",
                    }
                )
        out = {"options": options}
        if commands:
            out["commands"] = commands
        return out

    return {"prog": PROG, "version": __version__, **describe(parser)}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(f"{PROG}: error: {exc}", file=sys.stderr)
        return 1
    if getattr(args, "help_json", False):
        sys.stdout.write(canonical_json(_help_json(parser)))
        return 0
    func = getattr(args, "func", None)
    if func is None:
        parser.print_help()
        return 1
    try:
        return func(args) or 0
    except UsageError as exc:
        print(f"{PROG}: error: {exc}", file=sys.stderr)
        return 1
    except (LayoutFormatError, DataError) as exc:
        print(f"{PROG}: error: {exc}", file=sys.stderr)
        return 2
    except FileNotFoundError as exc:
        print(f"{PROG}: error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"{PROG}: error: {exc}", file=sys.stderr)
        return 1
    except ValueError as exc:
        print(f"{PROG}: error: {exc}", file=sys.stderr)
        return 2


def entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entry()
