"""Quality scoring and filter-pipeline composition.

Composite quality scoring over three 0-2 dimensions with provenance-based
weight profiles, threshold filtering against a ScorerEndpoint,
multi-round judge-consistency flagging, and an ordered stage pipeline with
exact per-stage accounting (input = kept + dropped + unscored, every stage).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Protocol, Sequence

from .corpus import Document, ParallelPair, Record, with_score
from .errors import ValidationError
from .scorers import ScorerEndpoint

QUALITY_COMPOSITE = "quality_composite"

DIMENSION_KEYS = ("knowledge_value", "authenticity", "writing_style")


@dataclass(frozen=True)
class QualityDimensions:
    """Human- or judge-assigned scores on the 0/1/2 scale."""

    knowledge_value: int
    authenticity: int
    writing_style: int

    def __post_init__(self):
        for key in DIMENSION_KEYS:
            value = getattr(self, key)
            if value not in (0, 1, 2):
                raise ValidationError(f"{key} must be 0, 1 or 2, got {value!r}")


@dataclass(frozen=True)
class WeightProfile:
    provenance: str
    w_knowledge: float
    w_authenticity: float
    w_writing: float

    def __post_init__(self):
        weights = (self.w_knowledge, self.w_authenticity, self.w_writing)
        if any(w < 0 for w in weights):
            raise ValidationError("dimension weights must be >= 0")
        if sum(weights) == 0:
            raise ValidationError("at least one dimension weight must be positive")


# Knowledge-heavy weighting for curated provenances, uniform for the open web.
DEFAULT_PROFILES = {
    "academic": WeightProfile("academic", 0.5, 0.25, 0.25),
    "book": WeightProfile("book", 0.5, 0.25, 0.25),
    "professional_web": WeightProfile("professional_web", 0.5, 0.25, 0.25),
    "general_web": WeightProfile("general_web", 1 / 3, 1 / 3, 1 / 3),
    "other": WeightProfile("other", 1 / 3, 1 / 3, 1 / 3),
}


def composite_quality(dims: QualityDimensions, profile: WeightProfile) -> float:
    """Weighted mean of the dimension scores, normalized to [0, 1].

    Invariant under positive rescaling of the weight vector; all-2 dims give
    exactly 1.0 and all-0 dims exactly 0.0.
    """
    weights = (profile.w_knowledge, profile.w_authenticity, profile.w_writing)
    scores = (dims.knowledge_value, dims.authenticity, dims.writing_style)
    return sum(w * s for w, s in zip(weights, scores)) / (2 * sum(weights))


def score_documents(
    docs: Sequence[Document],
    profiles: dict[str, WeightProfile] | None = None,
) -> tuple[list[Document], list[Document]]:
    """Attach the composite score to docs whose scores map carries all three
    dimension values; docs missing a dimension land in the second list."""
    profiles = profiles or DEFAULT_PROFILES
    scored: list[Document] = []
    missing: list[Document] = []
    for doc in docs:
        if not all(key in doc.scores for key in DIMENSION_KEYS):
            missing.append(doc)
            continue
        dims = QualityDimensions(*(int(doc.scores[key]) for key in DIMENSION_KEYS))
        profile = profiles.get(doc.provenance)
        if profile is None:
            raise ValidationError(f"no weight profile for provenance {doc.provenance!r}")
        scored.append(with_score(doc, QUALITY_COMPOSITE, composite_quality(dims, profile)))
    return scored, missing


def threshold_filter(
    pairs: Sequence[ParallelPair],
    scorer: ScorerEndpoint,
    tau: float,
) -> tuple[list[ParallelPair], list[ParallelPair], list[ParallelPair]]:
    """Keep pairs scoring >= tau; returns (kept, dropped, unscored).

    Every scored pair (kept or dropped) carries its score under the scorer's
    name; pairs the scorer failed on go to the unscored bucket unchanged.
    """
    lo, hi = scorer.score_range
    if not lo <= tau <= hi:
        raise ValidationError(f"tau={tau} outside scorer range [{lo}, {hi}]")
    items = [
        {"source": p.src_text, "hypothesis": p.tgt_text, "src_lang": p.src_lang, "tgt_lang": p.tgt_lang}
        for p in pairs
    ]
    kept: list[ParallelPair] = []
    dropped: list[ParallelPair] = []
    unscored: list[ParallelPair] = []
    for pair, score in zip(pairs, scorer.score_many(items)):
        if score is None:
            unscored.append(pair)
            continue
        scored = with_score(pair, scorer.name, score)
        (kept if score >= tau else dropped).append(scored)
    return kept, dropped, unscored


@dataclass(frozen=True)
class JudgeRecord:
    sample_id: str
    round_scores: tuple[float, ...]

    def __post_init__(self):
        if len(self.round_scores) < 2:
            raise ValidationError(f"sample {self.sample_id!r}: need >= 2 judge rounds")


def flag_inconsistent(
    records: Sequence[JudgeRecord], max_spread: float
) -> tuple[list[str], list[str]]:
    """Split sample ids into (consistent, flagged); flagged iff the spread
    max - min of the round scores exceeds max_spread."""
    if max_spread < 0:
        raise ValidationError(f"max_spread must be >= 0, got {max_spread}")
    consistent: list[str] = []
    flagged: list[str] = []
    for record in records:
        spread = max(record.round_scores) - min(record.round_scores)
        (flagged if spread > max_spread else consistent).append(record.sample_id)
    return consistent, flagged


# -- pipeline composition ----------------------------------------------------


class Stage(Protocol):
    name: str
    record_kind: str  # "mono" | "parallel"

    def apply(
        self, records: Sequence[Record]
    ) -> tuple[list[Record], list[tuple[Record, str]], list[Record]]:
        """-> (kept, dropped-with-reason, unscored)"""
        ...


@dataclass
class StageReport:
    name: str
    input_count: int
    kept: int
    dropped: int
    unscored: int
    reasons: dict[str, int] = field(default_factory=dict)

    def to_obj(self) -> dict:
        return {
            "name": self.name,
            "input_count": self.input_count,
            "kept": self.kept,
            "dropped": self.dropped,
            "unscored": self.unscored,
            "reasons": dict(sorted(self.reasons.items())),
        }


@dataclass
class LangIdStage:
    model: object  # LangIdModel
    expected: str
    min_confidence: float = 0.5
    name: str = "langid"
    record_kind: str = "mono"

    def apply(self, records):
        from .langid import filter_by_language

        kept, dropped = filter_by_language(records, self.model, self.expected, self.min_confidence)
        annotated = [(doc, f"predicted={pred}") for doc, pred, _conf in dropped]
        return kept, annotated, []


@dataclass
class DedupStage:
    n: int = 5
    k: int = 128
    seed: int = 0
    b: int = 16
    r: int = 8
    jaccard_threshold: float = 0.8
    unit: str = "word"
    jobs: int = 1
    name: str = "dedup"
    record_kind: str = "mono"

    def apply(self, records):
        from .minlsh import dedup

        kept, drops = dedup(
            records,
            n=self.n,
            k=self.k,
            seed=self.seed,
            b=self.b,
            r=self.r,
            jaccard_threshold=self.jaccard_threshold,
            unit=self.unit,
            jobs=self.jobs,
        )
        by_id = {rec.id: rec for rec in records}
        annotated = [(by_id[d.dropped_id], f"near_duplicate_of={d.kept_id}") for d in drops]
        return kept, annotated, []


@dataclass
class PerplexityStage:
    lm: object  # NGramLm
    mode: str = "percentile"
    max_ppl: float | None = None
    q: float | None = 0.95
    name: str = "perplexity"
    record_kind: str = "mono"

    def apply(self, records):
        from .ngram_lm import filter_high_perplexity

        kept, dropped = filter_high_perplexity(
            records, self.lm, mode=self.mode, max_ppl=self.max_ppl, q=self.q
        )
        annotated = [(doc, "high_perplexity") for doc, _ppl in dropped]
        return kept, annotated, []


@dataclass
class QualityThresholdStage:
    scorer: ScorerEndpoint
    tau: float
    name: str = "quality_threshold"
    record_kind: str = "parallel"

    def apply(self, records):
        kept, dropped, unscored = threshold_filter(records, self.scorer, self.tau)
        annotated = [(pair, "below_threshold") for pair in dropped]
        return kept, annotated, unscored


@dataclass
class PipelineResult:
    final: list[Record]
    reports: list[StageReport]
    dropped: list[tuple[str, Record, str]]  # (stage name, record, reason)
    unscored: list[tuple[str, Record]]


def run_pipeline(records: Sequence[Record], stages: Sequence[Stage]) -> PipelineResult:
    """Run stages in order; stage i consumes exactly stage i-1's kept set.

    Stage compatibility is validated before any processing. Dropped and
    unscored records leave the pipeline at their stage but are carried in
    the result, never lost.
    """
    kinds = {stage.record_kind for stage in stages}
    if len(kinds) > 1:
        raise ValidationError(f"stages mix record kinds {sorted(kinds)}")
    names = [stage.name for stage in stages]
    if len(set(names)) != len(names):
        raise ValidationError("stage names must be unique")

    current = list(records)
    reports: list[StageReport] = []
    all_dropped: list[tuple[str, Record, str]] = []
    all_unscored: list[tuple[str, Record]] = []
    for stage in stages:
        kept, dropped, unscored = stage.apply(current)
        if len(kept) + len(dropped) + len(unscored) != len(current):
            raise RuntimeError(f"stage {stage.name!r} accounting does not reconcile")
        reasons: dict[str, int] = {}
        for record, reason in dropped:
            key = reason.split("=", 1)[0]
            reasons[key] = reasons.get(key, 0) + 1
            all_dropped.append((stage.name, record, reason))
        all_unscored.extend((stage.name, record) for record in unscored)
        reports.append(
            StageReport(
                name=stage.name,
                input_count=len(current),
                kept=len(kept),
                dropped=len(dropped),
                unscored=len(unscored),
                reasons=reasons,
            )
        )
        current = kept
    return PipelineResult(current, reports, all_dropped, all_unscored)
