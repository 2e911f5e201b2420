"""Analytical FLOPs model and microbenchmark for layout-conditioning attention.

Counts one multiply-accumulate as 2 FLOPs and ignores softmax/normalization,
the convention of common FLOPs calculators, so totals are comparable across
variants.  Three variants are modeled:

  extended_self     self-attention over visual tokens concatenated with
                    grounded text tokens (the pattern of prior grounding
                    layers; text token count is a free parameter)
  regional_cross    one query projection over all visual tokens, cross-
                    attention per reorganized region against that region's
                    grounded sequence
  per_object_cross  cross-attention per object over that object's box tokens
                    (overlap tokens counted once per covering object) plus a
                    null sequence for uncovered tokens
"""

from __future__ import annotations

import csv
import io
import statistics
import time
from dataclasses import dataclass

import numpy as np

from .attention import attention_kernel
from .grounding import sequence_token_count, tokenize
from .layout import Layout, TokenGrid, rasterize_box
from .regions import reorganize

VARIANT_REGIONAL = "regional_cross"
VARIANT_EXTENDED = "extended_self"
VARIANT_PER_OBJECT = "per_object_cross"
VARIANTS = (VARIANT_REGIONAL, VARIANT_EXTENDED, VARIANT_PER_OBJECT)

SWEEP_COLUMNS = (
    "variant",
    "N",
    "C",
    "d",
    "heads",
    "objects",
    "T_total",
    "flops_total",
    "time_median_s",
)


@dataclass(frozen=True)
class AttentionConfig:
    """Shape summary of one layout-conditioning attention layer invocation.

    ``regions`` holds (token count, sequence length) per reorganized region;
    ``objects`` the same per object for the per-object variant, whose overlap
    tokens are intentionally double-counted.  ``background_tokens`` is the
    number of tokens covered by no object.
    """

    variant: str
    n_tokens: int
    channels: int
    attn_dim: int
    heads: int
    t_total: int
    regions: tuple[tuple[int, int], ...]
    objects: tuple[tuple[int, int], ...] = ()
    background_tokens: int = 0

    def validate(self) -> None:
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown variant {self.variant!r}")
        if min(self.n_tokens, self.channels, self.attn_dim, self.heads) <= 0:
            raise ValueError("all size fields must be positive")
        if self.attn_dim % self.heads != 0:
            raise ValueError(f"heads {self.heads} must divide attn_dim {self.attn_dim}")
        if self.t_total < 1:
            raise ValueError("t_total must be at least 1")
        for n_r, m_r in self.regions:
            if n_r <= 0 or m_r <= 0:
                raise ValueError("per-region sizes must be positive")
        if self.regions and sum(n for n, _ in self.regions) != self.n_tokens:
            raise ValueError("region token counts must sum to n_tokens")
        for n_j, m_j in self.objects:
            if n_j <= 0 or m_j <= 0:
                raise ValueError("per-object sizes must be positive")
        if self.background_tokens < 0:
            raise ValueError("background_tokens must be non-negative")


@dataclass(frozen=True)
class CostReport:
    variant: str
    projection_flops: int
    attention_flops: int
    output_flops: int

    @property
    def total(self) -> int:
        return self.projection_flops + self.attention_flops + self.output_flops


def relative_cost(report: CostReport, baseline: CostReport) -> float:
    return report.total / baseline.total


def flops(config: AttentionConfig) -> CostReport:
    """Closed-form FLOPs for one forward pass of the configured variant."""
    config.validate()
    n, c, d = config.n_tokens, config.channels, config.attn_dim
    if config.variant == VARIANT_EXTENDED:
        length = n + config.t_total
        proj = 2 * 3 * length * c * d
        attn = 2 * 2 * length * length * d
        out = 2 * length * d * c
    elif config.variant == VARIANT_REGIONAL:
        if not config.regions:
            raise ValueError("regional_cross requires per-region sizes")
        proj = 2 * n * c * d + sum(2 * 2 * m_r * c * d for _, m_r in config.regions)
        attn = sum(2 * 2 * n_r * m_r * d for n_r, m_r in config.regions)
        out = 2 * n * d * c
    else:  # per_object_cross
        if not config.objects and config.background_tokens == 0:
            raise ValueError("per_object_cross requires per-object sizes")
        terms = list(config.objects)
        if config.background_tokens:
            terms.append((config.background_tokens, 1))
        proj = sum(2 * n_j * c * d + 2 * 2 * m_j * c * d for n_j, m_j in terms)
        attn = sum(2 * 2 * n_j * m_j * d for n_j, m_j in terms)
        out = sum(2 * n_j * d * c for n_j, _ in terms)
    return CostReport(config.variant, proj, attn, out)


def config_from_layout(
    layout: Layout,
    grid: TokenGrid,
    variant: str,
    channels: int = 640,
    attn_dim: int = 640,
    heads: int = 8,
    t_total: int | None = None,
) -> AttentionConfig:
    """Derive per-region/per-object sizes from an actual layout and grid."""
    partition = reorganize(layout, grid)
    counts = {obj.id: len(tokenize(obj.text)) for obj in layout.objects}
    regions = tuple(
        (int(region.tokens.size), sequence_token_count([counts[i] for i in region.covering]))
        for region in partition.regions
    )
    objects = []
    for obj in layout.objects:
        toks = rasterize_box(obj.box, grid)
        if toks.size:
            objects.append((int(toks.size), sequence_token_count([counts[obj.id]])))
    background_index = partition.background_index()
    background = (
        int(partition.regions[background_index].tokens.size)
        if background_index is not None
        else 0
    )
    if t_total is None:
        t_total = max(1, sum(counts.values()))
    return AttentionConfig(
        variant=variant,
        n_tokens=grid.n_tokens,
        channels=channels,
        attn_dim=attn_dim,
        heads=heads,
        t_total=t_total,
        regions=regions,
        objects=tuple(objects),
        background_tokens=background,
    )


def two_object_config(
    variant: str,
    n_tokens: int,
    channels: int = 640,
    attn_dim: int = 640,
    heads: int = 8,
    t_total: int = 77,
) -> AttentionConfig:
    """Canonical two overlapping objects: two singles, one overlap, background."""
    if n_tokens < 8:
        raise ValueError(f"two-object structure needs n_tokens >= 8, got {n_tokens}")
    t1 = t_total // 2
    t2 = t_total - t1
    n_single = n_tokens // 4
    n_overlap = n_tokens // 8
    n_background = n_tokens - 2 * n_single - n_overlap
    regions = (
        (n_single, sequence_token_count([t1])),
        (n_overlap, sequence_token_count([t1, t2])),
        (n_single, sequence_token_count([t2])),
        (n_background, 1),
    )
    objects = (
        (n_single + n_overlap, sequence_token_count([t1])),
        (n_single + n_overlap, sequence_token_count([t2])),
    )
    return AttentionConfig(
        variant=variant,
        n_tokens=n_tokens,
        channels=channels,
        attn_dim=attn_dim,
        heads=heads,
        t_total=t_total,
        regions=regions,
        objects=objects,
        background_tokens=n_background,
    )


@dataclass(frozen=True)
class BenchmarkResult:
    variant: str
    n_tokens: int
    repetitions: int
    times_s: tuple[float, ...]

    @property
    def mean_s(self) -> float:
        return statistics.fmean(self.times_s)

    @property
    def median_s(self) -> float:
        return statistics.median(self.times_s)


def _bench_arrays(config: AttentionConfig, seed: int):
    rng = np.random.default_rng(seed)
    c, d = config.channels, config.attn_dim
    w_q = rng.standard_normal((c, d)) / np.sqrt(c)
    w_k = rng.standard_normal((c, d)) / np.sqrt(c)
    w_v = rng.standard_normal((c, d)) / np.sqrt(c)
    w_out = rng.standard_normal((d, c)) / np.sqrt(d)
    return rng, w_q, w_k, w_v, w_out


def benchmark(config: AttentionConfig, repetitions: int = 20, seed: int = 0) -> BenchmarkResult:
    """Wall time of the variant's kernel pattern over seeded random inputs.

    One warm-up run is excluded; the default of 20 repetitions matches the
    usual reporting protocol for this kind of layer microbenchmark.
    """
    flops(config)  # validates the config and its per-variant structure
    if repetitions < 1:
        raise ValueError("repetitions must be >= 1")
    rng, w_q, w_k, w_v, w_out = _bench_arrays(config, seed)
    c = config.channels
    h = config.heads

    if config.variant == VARIANT_EXTENDED:
        x = rng.standard_normal((config.n_tokens + config.t_total, c))

        def run() -> None:
            q = x @ w_q
            attention_kernel(q, x @ w_k, x @ w_v, h) @ w_out

    else:
        terms = list(config.regions)
        if config.variant == VARIANT_PER_OBJECT:
            terms = list(config.objects)
            if config.background_tokens:
                terms.append((config.background_tokens, 1))
        features = rng.standard_normal((config.n_tokens, c))
        sequences = [rng.standard_normal((m, c)) for _, m in terms]
        bounds = np.cumsum([0] + [n for n, _ in terms])

        def run() -> None:
            q = features @ w_q
            for (lo, hi), seq in zip(zip(bounds[:-1], bounds[1:]), sequences):
                attention_kernel(q[lo:hi], seq @ w_k, seq @ w_v, h) @ w_out

    run()  # warm-up, excluded
    times = []
    for _ in range(repetitions):
        start = time.perf_counter()
        run()
        times.append(time.perf_counter() - start)
    return BenchmarkResult(
        variant=config.variant,
        n_tokens=config.n_tokens,
        repetitions=repetitions,
        times_s=tuple(times),
    )


def sweep_rows(
    configs,
    include_time: bool = False,
    repetitions: int = 20,
    seed: int = 0,
) -> list[dict]:
    """One row per config with analytic FLOPs and optional measured time."""
    rows = []
    for config in configs:
        report = flops(config)
        row = {
            "variant": config.variant,
            "N": config.n_tokens,
            "C": config.channels,
            "d": config.attn_dim,
            "heads": config.heads,
            "objects": len(config.objects),
            "T_total": config.t_total,
            "flops_total": report.total,
            "time_median_s": "",
        }
        if include_time:
            result = benchmark(config, repetitions=repetitions, seed=seed)
            row["time_median_s"] = format(result.median_s, ".9g")
        rows.append(row)
    return rows


def sweep_csv(rows) -> str:
    """Render sweep rows to CSV text with the fixed column schema."""
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=SWEEP_COLUMNS, lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow(row)
    return buf.getvalue()


def default_sweep_configs(variants=VARIANTS) -> list[AttentionConfig]:
    """Grid of standard comparison points, including the 32x32/640-channel one."""
    configs = []
    for n in (256, 1024, 4096):
        for variant in variants:
            configs.append(two_object_config(variant, n_tokens=n))
    return configs
