"""Grounded sequence encoding.

Turns a region's selected object descriptions into the key/value token
sequence for regional cross-attention: per-token text embeddings concatenated
channel-wise with a sinusoidal encoding of the owning object's box.  Special
tokens (begin, separator, end) carry all -1 box channels, as does the learned
null token that stands in for regions with no objects.
"""

from __future__ import annotations

import hashlib
import re
from dataclasses import dataclass

import numpy as np

BOS_MARKER = "[bos]"
EOS_MARKER = "[eos]"
SEP_MARKER = "[sep]"
NULL_MARKER = "[null]"

KIND_BOS = "bos"
KIND_TEXT = "text"
KIND_SEP = "sep"
KIND_EOS = "eos"
KIND_NULL = "null"

MIN_TEXT_DIM = 8

_TOKEN_RE = re.compile(r"[a-z0-9]+")


def tokenize(text: str) -> list[str]:
    """Lowercase and split on whitespace/punctuation, dropping the punctuation."""
    return _TOKEN_RE.findall(text.lower())


class TextEmbedder:
    """Deterministic map from token strings to fixed-width unit vectors.

    Subclasses implement :meth:`embed`; the begin/end/separator vectors are
    the embeddings of reserved marker strings that plain tokenization can
    never produce (brackets are stripped by :func:`tokenize`).
    """

    dim: int

    def embed(self, token: str) -> np.ndarray:
        raise NotImplementedError

    @property
    def bos(self) -> np.ndarray:
        return self.embed(BOS_MARKER)

    @property
    def eos(self) -> np.ndarray:
        return self.embed(EOS_MARKER)

    @property
    def sep(self) -> np.ndarray:
        return self.embed(SEP_MARKER)


class HashEmbedder(TextEmbedder):
    """Seeded content-hash embedder: same string, same unit vector, any run.

    Stands in for a pretrained text encoder at toy scale; the hash goes
    through sha256 so results do not depend on interpreter hash salting.
    """

    def __init__(self, dim: int = 64, seed: int = 0):
        if dim < MIN_TEXT_DIM:
            raise ValueError(f"embedding dim must be >= {MIN_TEXT_DIM}, got {dim}")
        self.dim = dim
        self.seed = seed
        self._cache: dict[str, np.ndarray] = {}

    def embed(self, token: str) -> np.ndarray:
        vec = self._cache.get(token)
        if vec is None:
            digest = hashlib.sha256(f"{self.seed}:{token}".encode("utf-8")).digest()
            rng = np.random.default_rng(int.from_bytes(digest[:8], "little"))
            raw = rng.standard_normal(self.dim)
            norm = float(np.linalg.norm(raw))
            if norm < 1e-12:  # unreachable in practice, keeps the invariant airtight
                raw[0] = 1.0
                norm = 1.0
            vec = raw / norm
            vec.setflags(write=False)
            self._cache[token] = vec
        return vec


class FileTokenEmbedder(TextEmbedder):
    """Token embeddings read from a JSON map {token: vector}.

    Lets externally produced embeddings replace the hash embedder; vectors
    are re-normalized on load and the reserved markers must be present.
    """

    def __init__(self, table: dict[str, np.ndarray]):
        if not table:
            raise ValueError("embedding table is empty")
        dims = {v.shape[-1] for v in table.values()}
        if len(dims) != 1:
            raise ValueError(f"inconsistent embedding dims in table: {sorted(dims)}")
        self.dim = dims.pop()
        if self.dim < MIN_TEXT_DIM:
            raise ValueError(f"embedding dim must be >= {MIN_TEXT_DIM}, got {self.dim}")
        for marker in (BOS_MARKER, EOS_MARKER, SEP_MARKER):
            if marker not in table:
                raise ValueError(f"embedding table missing special token {marker!r}")
        self._table = {}
        for key, vec in table.items():
            norm = float(np.linalg.norm(vec))
            if norm < 1e-12:
                raise ValueError(f"zero-norm embedding for {key!r}")
            self._table[key] = np.asarray(vec, dtype=np.float64) / norm

    def embed(self, token: str) -> np.ndarray:
        try:
            return self._table[token]
        except KeyError:
            raise KeyError(f"token {token!r} not in embedding table") from None


@dataclass(frozen=True, eq=False)
class NullEmbedding:
    """Learned stand-in description attended by object-free regions."""

    vector: np.ndarray

    def __post_init__(self) -> None:
        if not np.all(np.isfinite(self.vector)):
            raise ValueError("null embedding must be finite")

    @property
    def dim(self) -> int:
        return int(self.vector.shape[0])

    @classmethod
    def create(cls, dim: int, seed: int = 0) -> "NullEmbedding":
        rng = np.random.default_rng(np.random.SeedSequence([seed, 0x6E756C6C]))
        vec = rng.standard_normal(dim) / np.sqrt(dim)
        vec.setflags(write=False)
        return cls(vector=vec)


@dataclass(frozen=True, eq=False)
class GroundedSequence:
    """Key/value token sequence for one region.

    ``tokens`` is (T, text_dim + box_dim); text channels come first, box
    indicator channels last.  ``kinds`` tags every row; text rows carry the
    id of the object they describe in ``source_object``.
    """

    tokens: np.ndarray
    kinds: tuple[str, ...]
    source_object: tuple[int | None, ...]
    text_dim: int
    box_dim: int

    @property
    def length(self) -> int:
        return int(self.tokens.shape[0])

    def equals(self, other: "GroundedSequence") -> bool:
        return (
            self.kinds == other.kinds
            and self.source_object == other.source_object
            and self.tokens.shape == other.tokens.shape
            and bool(np.array_equal(self.tokens, other.tokens))
        )


def sinusoidal_box_encoding(box, box_dim: int) -> np.ndarray:
    """Sinusoidal positional encoding of (x1, y1, x2, y2), concatenated.

    Each coordinate gets box_dim/4 channels with interleaved sin/cos at
    geometrically spaced frequencies, so box_dim must divide by 8.
    """
    if box_dim % 8 != 0 or box_dim <= 0:
        raise ValueError(f"box_dim must be a positive multiple of 8, got {box_dim}")
    per_coord = box_dim // 4
    half = per_coord // 2
    k = np.arange(half)
    denom = np.power(10000.0, 2.0 * k / per_coord)
    out = np.empty(box_dim, dtype=np.float64)
    for i, coord in enumerate(box.as_tuple()):
        base = i * per_coord
        out[base + 2 * k] = np.sin(coord / denom)
        out[base + 2 * k + 1] = np.cos(coord / denom)
    return out


def sequence_token_count(text_token_counts: list[int]) -> int:
    """Length of the encoded sequence for the given per-object token counts."""
    m = len(text_token_counts)
    if m == 0:
        return 1  # lone null token
    return 1 + sum(text_token_counts) + (m - 1) + 1


def encode_region(
    descriptions,
    embedder: TextEmbedder,
    null: NullEmbedding,
    box_dim: int = 32,
    use_box_indicator: bool = True,
) -> GroundedSequence:
    """Encode a region's descriptions into a grounded key/value sequence.

    Non-empty input yields [bos] tokens(o1) [sep] tokens(o2) ... [eos] with
    each text row carrying its object's box encoding, repeated across the
    object's tokens; empty input yields the single null token.  With the box
    indicator off the box channels are omitted entirely.
    """
    if null.dim != embedder.dim:
        raise ValueError(f"null dim {null.dim} != embedder dim {embedder.dim}")
    eff_box_dim = box_dim if use_box_indicator else 0
    if use_box_indicator and (box_dim % 8 != 0 or box_dim <= 0):
        raise ValueError(f"box_dim must be a positive multiple of 8, got {box_dim}")
    width = embedder.dim + eff_box_dim
    minus_ones = -np.ones(eff_box_dim)

    rows: list[np.ndarray] = []
    kinds: list[str] = []
    sources: list[int | None] = []

    def add(text_vec: np.ndarray, box_vec: np.ndarray, kind: str, source: int | None) -> None:
        rows.append(np.concatenate([text_vec, box_vec]) if eff_box_dim else np.asarray(text_vec, dtype=np.float64))
        kinds.append(kind)
        sources.append(source)

    descriptions = list(descriptions)
    if not descriptions:
        add(null.vector, minus_ones, KIND_NULL, None)
    else:
        add(embedder.bos, minus_ones, KIND_BOS, None)
        for pos, obj in enumerate(descriptions):
            if pos > 0:
                add(embedder.sep, minus_ones, KIND_SEP, None)
            box_vec = (
                sinusoidal_box_encoding(obj.box, box_dim) if eff_box_dim else minus_ones
            )
            for token in tokenize(obj.text):
                add(embedder.embed(token), box_vec, KIND_TEXT, obj.id)
        add(embedder.eos, minus_ones, KIND_EOS, None)

    tokens = np.vstack(rows).astype(np.float64, copy=False)
    assert tokens.shape == (len(rows), width)
    return GroundedSequence(
        tokens=tokens,
        kinds=tuple(kinds),
        source_object=tuple(sources),
        text_dim=embedder.dim,
        box_dim=eff_box_dim,
    )
