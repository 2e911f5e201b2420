"""Regional cross-attention over a token grid.

Each reorganized region cross-attends its visual tokens against the grounded
sequence of the objects covering it; regions with no objects attend a learned
null token so every visual token is conditioned.  The layer returns the
residual contribution only, and its output projection starts at zero so a
fresh layer is an exact identity on the backbone features.

``naive_forward`` recomputes the same map one token at a time, with no region
grouping or batching, and serves as the correctness oracle for the grouped
path.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .grounding import NullEmbedding, TextEmbedder, encode_region
from .layout import Layout, TokenGrid, covering_ids, nonempty_objects, rasterize_box
from .regions import reorganize

MODE_FULL = "full"
MODE_NO_REORG_AVG = "no_reorg_avg"
MODE_NO_BOX_INDICATOR = "no_box_indicator"
MODES = (MODE_FULL, MODE_NO_REORG_AVG, MODE_NO_BOX_INDICATOR)


@dataclass(frozen=True, eq=False)
class FeatureMap:
    """Visual token features: one row of ``channels`` floats per grid token."""

    grid: TokenGrid
    data: np.ndarray  # (N, C)

    def __post_init__(self) -> None:
        if self.data.ndim != 2 or self.data.shape[0] != self.grid.n_tokens:
            raise ValueError(
                f"feature matrix shape {self.data.shape} does not match grid "
                f"{self.grid.height}x{self.grid.width}"
            )

    @property
    def channels(self) -> int:
        return int(self.data.shape[1])

    @classmethod
    def random(cls, grid: TokenGrid, channels: int, seed: int) -> "FeatureMap":
        rng = np.random.default_rng(seed)
        return cls(grid=grid, data=rng.standard_normal((grid.n_tokens, channels)))


@dataclass(frozen=True, eq=False)
class AttentionState:
    """Projection weights and the null embedding for one attention layer.

    w_k/w_v take text channels first and box-indicator channels last, so the
    box-indicator ablation can run on the same state by using only the text
    rows of the shared projections.
    """

    w_q: np.ndarray  # (C, d)
    w_k: np.ndarray  # (text_dim + box_dim, d)
    w_v: np.ndarray  # (text_dim + box_dim, d)
    w_out: np.ndarray  # (d, C)
    heads: int
    null: NullEmbedding
    text_dim: int
    box_dim: int
    seed: int

    @property
    def channels(self) -> int:
        return int(self.w_q.shape[0])

    @property
    def attn_dim(self) -> int:
        return int(self.w_q.shape[1])

    @property
    def kv_dim(self) -> int:
        return self.text_dim + self.box_dim

    @classmethod
    def create(
        cls,
        channels: int,
        attn_dim: int = 64,
        heads: int = 4,
        text_dim: int = 64,
        box_dim: int = 32,
        seed: int = 0,
        zero_output: bool = True,
    ) -> "AttentionState":
        """Seeded initialization: scaled-normal projections, zero output by default."""
        if attn_dim % heads != 0:
            raise ValueError(f"heads {heads} must divide attn_dim {attn_dim}")
        if box_dim < 0 or (box_dim and box_dim % 8 != 0):
            raise ValueError(f"box_dim must be 0 or a multiple of 8, got {box_dim}")
        rng = np.random.default_rng(np.random.SeedSequence([seed, 0xA77E]))
        kv_dim = text_dim + box_dim
        w_q = rng.standard_normal((channels, attn_dim)) / np.sqrt(channels)
        w_k = rng.standard_normal((kv_dim, attn_dim)) / np.sqrt(kv_dim)
        w_v = rng.standard_normal((kv_dim, attn_dim)) / np.sqrt(kv_dim)
        if zero_output:
            w_out = np.zeros((attn_dim, channels))
        else:
            w_out = rng.standard_normal((attn_dim, channels)) / np.sqrt(attn_dim)
        null = NullEmbedding.create(text_dim, seed=seed)
        for w in (w_q, w_k, w_v, w_out):
            w.setflags(write=False)
        return cls(
            w_q=w_q,
            w_k=w_k,
            w_v=w_v,
            w_out=w_out,
            heads=heads,
            null=null,
            text_dim=text_dim,
            box_dim=box_dim,
            seed=seed,
        )


@dataclass(frozen=True)
class RegionDiagnostic:
    covering: tuple[int, ...]
    n_tokens: int
    seq_len: int


@dataclass(frozen=True, eq=False)
class AttentionOutput:
    """Residual contribution per token plus per-region bookkeeping."""

    grid: TokenGrid
    data: np.ndarray  # (N, C)
    diagnostics: tuple[RegionDiagnostic, ...]
    mode: str


def attention_kernel(q: np.ndarray, k: np.ndarray, v: np.ndarray, heads: int = 1) -> np.ndarray:
    """Scaled dot-product multi-head attention of q (n, d) over k/v (m, d).

    Softmax is stabilized by row-max subtraction so saturated logits stay
    exact; m must be at least 1 (region sequences always contain the null or
    at least begin/end tokens).
    """
    n, d = q.shape
    m = k.shape[0]
    if m == 0:
        raise ValueError("attention requires at least one key")
    if k.shape != (m, d) or v.shape != (m, d):
        raise ValueError(f"inconsistent attention shapes q={q.shape} k={k.shape} v={v.shape}")
    if d % heads != 0:
        raise ValueError(f"heads {heads} must divide dim {d}")
    dh = d // heads
    qh = q.reshape(n, heads, dh).transpose(1, 0, 2)  # (h, n, dh)
    kh = k.reshape(m, heads, dh).transpose(1, 0, 2)
    vh = v.reshape(m, heads, dh).transpose(1, 0, 2)
    scores = qh @ kh.transpose(0, 2, 1) / np.sqrt(dh)  # (h, n, m)
    scores = scores - scores.max(axis=2, keepdims=True)
    weights = np.exp(scores)
    weights /= weights.sum(axis=2, keepdims=True)
    out = weights @ vh  # (h, n, dh)
    return out.transpose(1, 0, 2).reshape(n, d)


def _check_inputs(features: FeatureMap, state: AttentionState, embedder: TextEmbedder) -> None:
    if features.channels != state.channels:
        raise ValueError(
            f"feature channels {features.channels} != state channels {state.channels}"
        )
    if embedder.dim != state.text_dim:
        raise ValueError(f"embedder dim {embedder.dim} != state text_dim {state.text_dim}")
    if not np.all(np.isfinite(features.data)):
        raise ValueError("feature map contains NaN or Inf")


def _sequence_attention(
    q_rows: np.ndarray, seq_tokens: np.ndarray, state: AttentionState, use_box: bool
) -> np.ndarray:
    """Project a grounded sequence to K/V and attend the given query rows."""
    kv_rows = state.kv_dim if use_box else state.text_dim
    if seq_tokens.shape[1] != kv_rows:
        raise ValueError(
            f"sequence width {seq_tokens.shape[1]} does not match projection ({kv_rows})"
        )
    w_k = state.w_k[:kv_rows]
    w_v = state.w_v[:kv_rows]
    ctx = attention_kernel(q_rows, seq_tokens @ w_k, seq_tokens @ w_v, state.heads)
    return ctx @ state.w_out


def _warn_zero_token_objects(layout: Layout, grid: TokenGrid) -> None:
    for obj in layout.objects:
        if rasterize_box(obj.box, grid).size == 0:
            warnings.warn(
                f"object {obj.id} rasterizes to zero tokens on "
                f"{grid.height}x{grid.width} grid; it will not condition any token",
                stacklevel=3,
            )


def regional_forward(
    features: FeatureMap,
    layout: Layout,
    state: AttentionState,
    embedder: TextEmbedder,
    mode: str = MODE_FULL,
    region_order=None,
) -> AttentionOutput:
    """Regional cross-attention between visual tokens and grounded sequences.

    full: reorganize into covering-set regions, attend each region against
    its own grounded sequence, scatter results (targets are disjoint, so
    processing order cannot matter; ``region_order`` exists to prove it).

    no_reorg_avg: attend each object's box tokens against that object's
    sequence alone and average where boxes overlap; uncovered tokens attend
    the null sequence.

    no_box_indicator: full, with box-indicator channels omitted from the
    grounded sequences.
    """
    if mode not in MODES:
        raise ValueError(f"unknown mode {mode!r}, expected one of {MODES}")
    _check_inputs(features, state, embedder)
    _warn_zero_token_objects(layout, features.grid)
    if mode == MODE_NO_REORG_AVG:
        return _forward_per_object_avg(features, layout, state, embedder)
    use_box = mode != MODE_NO_BOX_INDICATOR

    partition = reorganize(layout, features.grid)
    n, c = features.data.shape
    q = features.data @ state.w_q
    out = np.zeros((n, c))
    diags = []
    order = range(partition.n_regions) if region_order is None else region_order
    by_id = {obj.id: obj for obj in layout.objects}
    for ridx in order:
        region = partition.regions[ridx]
        descriptions = [by_id[i] for i in region.covering]
        seq = encode_region(
            descriptions, embedder, state.null, state.box_dim, use_box_indicator=use_box
        )
        out[region.tokens] = _sequence_attention(q[region.tokens], seq.tokens, state, use_box)
        diags.append(
            RegionDiagnostic(
                covering=region.covering, n_tokens=int(region.tokens.size), seq_len=seq.length
            )
        )
    if region_order is not None:
        diags.sort(key=lambda d: (d.covering == (), d.covering))
    return AttentionOutput(grid=features.grid, data=out, diagnostics=tuple(diags), mode=mode)


def _forward_per_object_avg(
    features: FeatureMap, layout: Layout, state: AttentionState, embedder: TextEmbedder
) -> AttentionOutput:
    n, c = features.data.shape
    q = features.data @ state.w_q
    acc = np.zeros((n, c))
    count = np.zeros(n, dtype=np.int64)
    diags = []
    for obj, tokens in nonempty_objects(layout, features.grid):
        seq = encode_region([obj], embedder, state.null, state.box_dim, use_box_indicator=True)
        acc[tokens] += _sequence_attention(q[tokens], seq.tokens, state, use_box=True)
        count[tokens] += 1
        diags.append(
            RegionDiagnostic(covering=(obj.id,), n_tokens=int(tokens.size), seq_len=seq.length)
        )
    covered = count > 0
    out = np.zeros((n, c))
    out[covered] = acc[covered] / count[covered, None]
    uncovered = np.flatnonzero(~covered)
    null_seq = encode_region([], embedder, state.null, state.box_dim, use_box_indicator=True)
    if uncovered.size:
        out[uncovered] = _sequence_attention(q[uncovered], null_seq.tokens, state, use_box=True)
    diags.append(
        RegionDiagnostic(covering=(), n_tokens=int(uncovered.size), seq_len=null_seq.length)
    )
    return AttentionOutput(
        grid=features.grid, data=out, diagnostics=tuple(diags), mode=MODE_NO_REORG_AVG
    )


def naive_forward(
    features: FeatureMap,
    layout: Layout,
    state: AttentionState,
    embedder: TextEmbedder,
) -> AttentionOutput:
    """Per-token reference path: no region grouping, no batching.

    Each token's covering set is recomputed from the box membership of its
    own center, its grounded sequence rebuilt from scratch, and a single-row
    attention executed.  Kept deliberately simple; the grouped path must
    match it.
    """
    _check_inputs(features, state, embedder)
    grid = features.grid
    n, c = features.data.shape
    q = features.data @ state.w_q
    out = np.zeros((n, c))
    by_id = {obj.id: obj for obj in layout.objects}
    for index in range(n):
        cx, cy = grid.token_center(index)
        covering = covering_ids(layout, cx, cy)
        descriptions = [by_id[i] for i in covering]
        seq = encode_region(
            descriptions, embedder, state.null, state.box_dim, use_box_indicator=True
        )
        out[index] = _sequence_attention(q[index : index + 1], seq.tokens, state, use_box=True)[0]
    return AttentionOutput(grid=grid, data=out, diagnostics=(), mode="naive")
