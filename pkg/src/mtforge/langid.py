"""Character-n-gram Naive Bayes language identification.

Self-contained stand-in for an external language-ID model: multinomial
Naive Bayes over character n-grams with add-alpha smoothing. Text is
lowercased (per-codepoint, so CJK and other unicameral scripts are
untouched) before n-gram extraction.
"""

from __future__ import annotations

import json
import math
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

from .corpus import Document, registry_order, require_tag
from .errors import ValidationError
from .ioutils import atomic_write


def extract_ngrams(text: str, ngram_range: tuple[int, int]) -> Counter[str]:
    """Multiset of character n-grams for every n in the inclusive range."""
    lo, hi = ngram_range
    if lo < 1 or hi < lo:
        raise ValidationError(f"bad ngram range {ngram_range}")
    folded = text.lower()
    grams: Counter[str] = Counter()
    for n in range(lo, hi + 1):
        for i in range(len(folded) - n + 1):
            grams[folded[i : i + n]] += 1
    return grams


@dataclass(frozen=True)
class LangIdModel:
    classes: tuple[str, ...]
    log_priors: dict[str, float]
    ngram_range: tuple[int, int]
    smoothing_alpha: float
    vocab: frozenset[str]
    log_likelihoods: dict[str, dict[str, float]]
    unseen_log_likelihood: dict[str, float]


def train_langid(
    labeled_docs: Sequence[Document],
    ngram_range: tuple[int, int] = (1, 3),
    alpha: float = 0.5,
) -> LangIdModel:
    """Fit class priors and smoothed n-gram likelihoods from labeled documents.

    Priors are class document frequencies. Likelihoods are add-alpha smoothed
    over vocab plus one shared unseen slot, so each class distribution sums
    to one. Deterministic given the same document multiset, in any order.
    """
    if alpha <= 0:
        raise ValidationError(f"smoothing alpha must be > 0, got {alpha}")
    if not labeled_docs:
        raise ValidationError("no training documents")

    counts: dict[str, Counter[str]] = {}
    doc_counts: Counter[str] = Counter()
    for doc in labeled_docs:
        counts.setdefault(doc.lang, Counter()).update(extract_ngrams(doc.text, ngram_range))
        doc_counts[doc.lang] += 1
    for lang, grams in counts.items():
        if not grams:
            raise ValidationError(f"class {lang!r} has no n-grams")

    classes = tuple(sorted(counts, key=registry_order))
    total_docs = sum(doc_counts.values())
    log_priors = {c: math.log(doc_counts[c] / total_docs) for c in classes}
    vocab = frozenset().union(*counts.values())

    log_likelihoods: dict[str, dict[str, float]] = {}
    unseen: dict[str, float] = {}
    denom_slots = len(vocab) + 1
    for c in classes:
        total = sum(counts[c].values())
        denom = total + alpha * denom_slots
        log_likelihoods[c] = {g: math.log((counts[c][g] + alpha) / denom) for g in vocab}
        unseen[c] = math.log(alpha / denom)

    return LangIdModel(
        classes=classes,
        log_priors=log_priors,
        ngram_range=ngram_range,
        smoothing_alpha=alpha,
        vocab=vocab,
        log_likelihoods=log_likelihoods,
        unseen_log_likelihood=unseen,
    )


def posteriors(model: LangIdModel, text: str) -> dict[str, float]:
    """Normalized class posteriors for a text; sums to 1."""
    if not text:
        raise ValidationError("cannot classify empty text")
    grams = extract_ngrams(text, model.ngram_range)
    log_posts = []
    for c in model.classes:
        table = model.log_likelihoods[c]
        fallback = model.unseen_log_likelihood[c]
        lp = model.log_priors[c]
        for gram, count in grams.items():
            lp += count * table.get(gram, fallback)
        log_posts.append(lp)
    peak = max(log_posts)
    exps = [math.exp(lp - peak) for lp in log_posts]
    norm = sum(exps)
    return {c: e / norm for c, e in zip(model.classes, exps)}


def predict_lang(model: LangIdModel, text: str) -> tuple[str, float]:
    """Argmax class and its posterior; ties break toward registry order."""
    post = posteriors(model, text)
    best = max(model.classes, key=lambda c: post[c])  # first max wins on ties
    return best, post[best]


def filter_by_language(
    docs: Sequence[Document],
    model: LangIdModel,
    expected: str,
    min_confidence: float = 0.5,
) -> tuple[list[Document], list[tuple[Document, str, float]]]:
    """Keep docs predicted as `expected` with confidence >= min_confidence.

    Dropped docs are returned with their (predicted, confidence) so nothing
    is discarded silently.
    """
    require_tag(expected)
    if not 0 <= min_confidence <= 1:
        raise ValidationError(f"min_confidence must be in [0, 1], got {min_confidence}")
    kept: list[Document] = []
    dropped: list[tuple[Document, str, float]] = []
    for doc in docs:
        predicted, confidence = predict_lang(model, doc.text)
        if predicted == expected and confidence >= min_confidence:
            kept.append(doc)
        else:
            dropped.append((doc, predicted, confidence))
    return kept, dropped


def save_langid(model: LangIdModel, path: str | Path) -> None:
    payload = {
        "format": "mtforge-langid",
        "version": 1,
        "classes": list(model.classes),
        "log_priors": model.log_priors,
        "ngram_range": list(model.ngram_range),
        "smoothing_alpha": model.smoothing_alpha,
        "vocab": sorted(model.vocab),
        "log_likelihoods": {c: model.log_likelihoods[c] for c in model.classes},
        "unseen_log_likelihood": model.unseen_log_likelihood,
    }
    with atomic_write(path) as handle:
        json.dump(payload, handle, ensure_ascii=False, sort_keys=True)
        handle.write("\n")


def load_langid(path: str | Path) -> LangIdModel:
    with open(path, encoding="utf-8") as handle:
        payload = json.load(handle)
    if payload.get("format") != "mtforge-langid":
        raise ValidationError(f"{path}: not a language-id model file")
    return LangIdModel(
        classes=tuple(payload["classes"]),
        log_priors=dict(payload["log_priors"]),
        ngram_range=tuple(payload["ngram_range"]),
        smoothing_alpha=payload["smoothing_alpha"],
        vocab=frozenset(payload["vocab"]),
        log_likelihoods={c: dict(t) for c, t in payload["log_likelihoods"].items()},
        unseen_log_likelihood=dict(payload["unseen_log_likelihood"]),
    )
