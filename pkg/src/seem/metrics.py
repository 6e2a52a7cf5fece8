"""Lexical QA metrics: multiset token F1 and unigram BLEU.

Normalization (pinned for bit-exact tests): casefold, delete every Unicode
punctuation-category character, split on whitespace. Articles are kept.
"""

from __future__ import annotations

import math
import unicodedata
from collections import Counter

_PUNCT_CACHE: dict[str, bool] = {}


def _is_punct(ch: str) -> bool:
    cached = _PUNCT_CACHE.get(ch)
    if cached is None:
        cached = unicodedata.category(ch).startswith("P")
        _PUNCT_CACHE[ch] = cached
    return cached


def normalize(text: str) -> list[str]:
    """Casefold, strip punctuation characters, whitespace-tokenize."""
    cleaned = "".join(ch for ch in text.casefold() if not _is_punct(ch))
    return cleaned.split()


def token_f1(prediction: str, gold: str) -> float:
    """Multiset-overlap F1 over normalized tokens.

    Both empty -> 1.0; exactly one empty -> 0.0.
    """
    pred = normalize(prediction)
    ref = normalize(gold)
    if not pred and not ref:
        return 1.0
    if not pred or not ref:
        return 0.0
    common = sum((Counter(pred) & Counter(ref)).values())
    if common == 0:
        return 0.0
    precision = common / len(pred)
    recall = common / len(ref)
    return 2 * precision * recall / (precision + recall)


def bleu1(prediction: str, gold: str) -> float:
    """Modified unigram precision with clipping times the brevity penalty.

    Single-reference, single-candidate, sentence-level: BP = exp(1 - r/c)
    when the candidate is shorter than the reference, else 1. Empty-input
    conventions mirror token_f1.
    """
    pred = normalize(prediction)
    ref = normalize(gold)
    if not pred and not ref:
        return 1.0
    if not pred or not ref:
        return 0.0
    clipped = sum((Counter(pred) & Counter(ref)).values())
    precision = clipped / len(pred)
    if precision == 0.0:
        return 0.0
    c, r = len(pred), len(ref)
    brevity = 1.0 if c >= r else math.exp(1.0 - r / c)
    return precision * brevity


def exact_match(prediction: str, gold: str) -> bool:
    """Normalized string equality; the only verdict semantics the mock carries."""
    return normalize(prediction) == normalize(gold)
