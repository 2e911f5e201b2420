"""Description text statistics: length, readability, diversity, bucketing.

Readability uses the Gunning Fog index, 0.4 * (words per sentence + 100 *
complex-word ratio), where a complex word has three or more syllables under
a vowel-group heuristic with a trailing-silent-e adjustment.  Buckets follow
the usual reporting splits: complexity easy (fog <= 4), medium (<= 8), hard
(> 8); length phrase (<= 8 words), short sentence (<= 15), long (>= 16).
"""

from __future__ import annotations

import re
from dataclasses import dataclass

from .grounding import tokenize

_VOWELS = set("aeiouy")
_SENTENCE_SPLIT = re.compile(r"[.!?]+")

COMPLEXITY_EASY = "easy"
COMPLEXITY_MEDIUM = "medium"
COMPLEXITY_HARD = "hard"
LENGTH_PHRASE = "phrase"
LENGTH_SHORT = "short_sentence"
LENGTH_LONG = "long_sentence"

FOG_EASY_MAX = 4.0
FOG_MEDIUM_MAX = 8.0
PHRASE_MAX_WORDS = 8
SHORT_MAX_WORDS = 15


def count_syllables(word: str) -> int:
    """Contiguous vowel groups, minimum one; a trailing silent e is dropped
    unless the word ends in a consonant + 'le' ("make" is 1, "table" is 2)."""
    w = re.sub(r"[^a-z]", "", word.lower())
    if not w:
        return 1
    if len(w) > 2 and w.endswith("e") and not w.endswith("le"):
        w = w[:-1]
    groups = 0
    in_group = False
    for ch in w:
        if ch in _VOWELS:
            if not in_group:
                groups += 1
            in_group = True
        else:
            in_group = False
    return max(groups, 1)


def is_complex_word(word: str) -> bool:
    return count_syllables(word) >= 3


def count_sentences(text: str) -> int:
    segments = [seg for seg in _SENTENCE_SPLIT.split(text) if seg.strip()]
    return max(len(segments), 1)


def gunning_fog(text: str) -> float:
    words = tokenize(text)
    if not words:
        return 0.0
    sentences = count_sentences(text)
    complex_count = sum(1 for w in words if is_complex_word(w))
    return 0.4 * (len(words) / sentences + 100.0 * complex_count / len(words))


def complexity_bucket(text: str) -> str:
    fog = gunning_fog(text)
    if fog <= FOG_EASY_MAX:
        return COMPLEXITY_EASY
    if fog <= FOG_MEDIUM_MAX:
        return COMPLEXITY_MEDIUM
    return COMPLEXITY_HARD


def length_bucket(text: str) -> str:
    n_words = len(tokenize(text))
    if n_words <= PHRASE_MAX_WORDS:
        return LENGTH_PHRASE
    if n_words <= SHORT_MAX_WORDS:
        return LENGTH_SHORT
    return LENGTH_LONG


def bucket_descriptions(labels) -> list[tuple[str, str]]:
    """(complexity bucket, length bucket) per label, deterministic."""
    return [(complexity_bucket(label), length_bucket(label)) for label in labels]


@dataclass(frozen=True)
class TextStats:
    lengths: tuple[int, ...]
    fogs: tuple[float, ...]
    unique_counts: tuple[int, ...]

    @property
    def n_samples(self) -> int:
        return len(self.lengths)

    @property
    def avg_length(self) -> float:
        return sum(self.lengths) / self.n_samples if self.n_samples else 0.0

    @property
    def avg_fog(self) -> float:
        return sum(self.fogs) / self.n_samples if self.n_samples else 0.0

    @property
    def avg_unique_words(self) -> float:
        return sum(self.unique_counts) / self.n_samples if self.n_samples else 0.0


def text_stats(labels) -> TextStats:
    """Per-label token counts, fog scores, and distinct-word counts."""
    labels = list(labels)
    lengths = tuple(len(tokenize(label)) for label in labels)
    fogs = tuple(gunning_fog(label) for label in labels)
    unique_counts = tuple(len(set(tokenize(label))) for label in labels)
    return TextStats(lengths=lengths, fogs=fogs, unique_counts=unique_counts)
