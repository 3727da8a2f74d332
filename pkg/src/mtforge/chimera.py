"""Multi-candidate translation and weak-to-strong fusion orchestration.

Prompt rendering is byte-exact and covered by golden files: a Chinese
instruction template when a Sinitic language is on either side of the pair,
an English one otherwise, and an English fusion prompt that lists the
candidates in fenced blocks. Candidate generation fans out over a sampling
grid against a pluggable completion backend; fusion sends one dependent
request and falls back to score-based selection (or the first candidate)
when the fusion backend fails.
"""

from __future__ import annotations

import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional, Sequence

from .backends import BackendFailure, BackendSpec, GenerationParams, complete
from .corpus import SINITIC_TAGS, display_name, require_tag
from .errors import OrchestrationError, ValidationError
from .scorers import ScorerEndpoint

ZH_TEMPLATE = "把下面的文本翻译成{target}，不要额外解释。\n\n{text}"
EN_TEMPLATE = "Translate the following segment into {target}, without additional explanation.\n\n{text}"

FUSION_HEADER = (
    "Analyze the following multiple {tgt} translations of the {src} segment "
    "surrounded in triple backticks and generate a single refined {tgt} "
    "translation. Only output the refined translation, do not explain."
)


def render_translation_prompt(src_lang: str, tgt_lang: str, text: str) -> str:
    """Single-segment translation prompt; Chinese wording whenever a Sinitic
    tag is on either side, English wording otherwise."""
    require_tag(src_lang)
    require_tag(tgt_lang)
    if src_lang == tgt_lang:
        raise ValidationError(f"source and target language are both {src_lang!r}")
    if src_lang in SINITIC_TAGS or tgt_lang in SINITIC_TAGS:
        return ZH_TEMPLATE.format(target=display_name(tgt_lang, "zh"), text=text)
    return EN_TEMPLATE.format(target=display_name(tgt_lang, "en"), text=text)


def _fence(content: str) -> str:
    """Wrap content in a backtick fence longer than any run it contains.

    Content that is empty or starts/ends with a space or backtick is padded
    with one space on each side; the parser strips the padding back off.
    """
    runs = re.findall(r"`+", content)
    width = max(3, max((len(r) for r in runs), default=0) + 1)
    if not content or content[0] in " `" or content[-1] in " `":
        content = f" {content} "
    return "`" * width + content + "`" * width


def _unfence_at(text: str, pos: int) -> tuple[str, int]:
    """Parse one fenced block starting at pos; returns (content, end pos)."""
    match = re.compile(r"`+").match(text, pos)
    if not match:
        raise ValidationError(f"expected a backtick fence at offset {pos}")
    width = match.end() - match.start()
    closing = re.compile("(?<!`)" + "`" * width + "(?!`)")
    close = closing.search(text, match.end())
    if not close:
        raise ValidationError("unterminated backtick fence")
    content = text[match.end() : close.start()]
    if len(content) >= 2 and content[0] == " " and content[-1] == " ":
        content = content[1:-1]
    return content, close.end()


def render_fusion_prompt(
    src_lang: str, tgt_lang: str, source_text: str, candidates: Sequence[str]
) -> str:
    """Fusion prompt listing the source and all numbered candidates."""
    require_tag(src_lang)
    require_tag(tgt_lang)
    if len(candidates) < 2:
        raise ValidationError(f"fusion needs >= 2 candidates, got {len(candidates)}")
    src = display_name(src_lang, "en")
    tgt = display_name(tgt_lang, "en")
    lines = [
        FUSION_HEADER.format(src=src, tgt=tgt),
        "",
        f"The {src} segment:",
        _fence(source_text),
        "",
        f"The multiple {tgt} translations:",
    ]
    for i, candidate in enumerate(candidates, start=1):
        lines.append(f"{i}. {_fence(candidate)}")
    return "\n".join(lines)


def parse_fusion_prompt(prompt: str) -> tuple[str, str, str, list[str]]:
    """Inverse of render_fusion_prompt.

    Returns (source_language_name, target_language_name, source_text,
    candidates). Raises ValidationError when the layout does not match.
    """
    header = re.match(
        r"Analyze the following multiple (.+?) translations of the (.+?) segment "
        r"surrounded in triple backticks",
        prompt,
    )
    if not header:
        raise ValidationError("not a fusion prompt")
    tgt, src = header.group(1), header.group(2)
    marker = f"\nThe {src} segment:\n"
    found = prompt.find(marker)
    if found < 0:
        raise ValidationError("source segment header not found")
    start = found + len(marker)
    source_text, pos = _unfence_at(prompt, start)
    list_marker = f"\n\nThe multiple {tgt} translations:\n"
    if not prompt.startswith(list_marker, pos):
        raise ValidationError("candidate list header not found")
    pos += len(list_marker)
    candidates: list[str] = []
    index = 1
    while pos < len(prompt):
        prefix = f"{index}. "
        if not prompt.startswith(prefix, pos):
            raise ValidationError(f"expected candidate {index} at offset {pos}")
        candidate, pos = _unfence_at(prompt, pos + len(prefix))
        candidates.append(candidate)
        index += 1
        if pos < len(prompt):
            if prompt[pos] != "\n":
                raise ValidationError(f"unexpected content at offset {pos}")
            pos += 1
    if len(candidates) < 2:
        raise ValidationError("fusion prompt lists fewer than 2 candidates")
    return src, tgt, source_text, candidates


def clean_generation(text: str) -> str:
    """Normalize a raw completion: trim whitespace, drop one enclosing
    code fence (with optional language label) if present."""
    cleaned = text.strip()
    if cleaned.startswith("```") and cleaned.endswith("```") and len(cleaned) > 6:
        inner = cleaned[3:-3]
        if "\n" in inner:
            first, rest = inner.split("\n", 1)
            if first == "" or first.isalnum():
                inner = rest
        cleaned = inner.strip()
    return cleaned


def default_grid() -> list[GenerationParams]:
    """Six sampling configurations: one greedy, four spread temperatures,
    and a repeated high temperature under a different seed."""
    temperatures = (0.0, 0.3, 0.5, 0.7, 1.0, 1.0)
    return [
        GenerationParams(temperature=t, top_p=0.95, max_tokens=1024, seed=i + 1)
        for i, t in enumerate(temperatures)
    ]


@dataclass(frozen=True)
class SlotFailure:
    index: int
    params: GenerationParams
    error: str


@dataclass(frozen=True)
class CandidateSet:
    source_text: str
    src_lang: str
    tgt_lang: str
    candidates: tuple[str, ...]
    params_used: tuple[GenerationParams, ...]
    failures: tuple[SlotFailure, ...] = ()

    def __post_init__(self):
        if len(self.candidates) < 2:
            raise ValidationError("a candidate set needs >= 2 candidates")
        if len(self.candidates) != len(self.params_used):
            raise ValidationError("candidates and params_used differ in length")


@dataclass(frozen=True)
class FusionResult:
    fused_text: str
    fallback_used: bool
    candidate_scores: Optional[tuple[float | None, ...]] = None


def generate_candidates(
    backend: BackendSpec,
    src_lang: str,
    tgt_lang: str,
    text: str,
    grid: Sequence[GenerationParams] | None = None,
    per_slot_backends: Sequence[BackendSpec | None] | None = None,
    max_workers: int = 4,
) -> CandidateSet:
    """One translation request per grid entry, assembled in grid order.

    Slots whose requests fail permanently (or come back empty after
    cleaning) are dropped along with their grid entry and recorded as
    failures. Fewer than two surviving candidates is an orchestration error.
    """
    grid = list(grid) if grid is not None else default_grid()
    if len(grid) < 2:
        raise ValidationError(f"grid must have >= 2 entries, got {len(grid)}")
    if per_slot_backends is not None and len(per_slot_backends) != len(grid):
        raise ValidationError("per_slot_backends must match the grid length")
    prompt = render_translation_prompt(src_lang, tgt_lang, text)

    def run_slot(index: int) -> tuple[int, str | None, str]:
        spec = backend
        if per_slot_backends is not None and per_slot_backends[index] is not None:
            spec = per_slot_backends[index]
        try:
            raw = complete(spec, prompt, grid[index])
        except BackendFailure as exc:
            return index, None, str(exc)
        cleaned = clean_generation(raw)
        if not cleaned:
            return index, None, "empty completion"
        return index, cleaned, ""

    with ThreadPoolExecutor(max_workers=max(1, max_workers)) as pool:
        results = list(pool.map(run_slot, range(len(grid))))

    candidates: list[str] = []
    params_used: list[GenerationParams] = []
    failures: list[SlotFailure] = []
    for index, cleaned, error in sorted(results):
        if cleaned is None:
            failures.append(SlotFailure(index, grid[index], error))
        else:
            candidates.append(cleaned)
            params_used.append(grid[index])
    if len(candidates) < 2:
        raise OrchestrationError(
            f"only {len(candidates)} of {len(grid)} candidate requests succeeded"
        )
    return CandidateSet(
        source_text=text,
        src_lang=src_lang,
        tgt_lang=tgt_lang,
        candidates=tuple(candidates),
        params_used=tuple(params_used),
        failures=tuple(failures),
    )


def select_best(
    candidates: Sequence[str],
    scorer: ScorerEndpoint,
    source: str | None = None,
) -> tuple[int, float]:
    """Highest-scoring candidate as (1-based index, score); ties take the
    lowest index. Scorer failure on every candidate is an error."""
    if not candidates:
        raise ValidationError("no candidates to select from")
    items = [{"source": source, "hypothesis": c} for c in candidates]
    scores = scorer.score_many(items)
    if all(s is None for s in scores):
        raise OrchestrationError("scorer failed on every candidate")
    best_index = None
    best_score = None
    for i, score in enumerate(scores):
        if score is not None and (best_score is None or score > best_score):
            best_index, best_score = i, score
    return best_index + 1, best_score


def fuse(
    backend: BackendSpec,
    candidate_set: CandidateSet,
    fallback_scorer: ScorerEndpoint | None = None,
) -> FusionResult:
    """Fuse candidates into one output via the fusion backend.

    On backend failure or an empty completion, falls back to the
    best-scoring candidate when a scorer is available, else candidate 1.
    The result is never empty.
    """
    prompt = render_fusion_prompt(
        candidate_set.src_lang,
        candidate_set.tgt_lang,
        candidate_set.source_text,
        candidate_set.candidates,
    )
    try:
        fused = clean_generation(complete(backend, prompt, GenerationParams(temperature=0.0, seed=0)))
        if fused:
            return FusionResult(fused_text=fused, fallback_used=False)
    except BackendFailure:
        pass
    if fallback_scorer is not None:
        items = [{"source": candidate_set.source_text, "hypothesis": c} for c in candidate_set.candidates]
        scores = fallback_scorer.score_many(items)
        if any(s is not None for s in scores):
            best_index = None
            best_score = None
            for i, score in enumerate(scores):
                if score is not None and (best_score is None or score > best_score):
                    best_index, best_score = i, score
            return FusionResult(
                fused_text=candidate_set.candidates[best_index],
                fallback_used=True,
                candidate_scores=tuple(scores),
            )
    return FusionResult(fused_text=candidate_set.candidates[0], fallback_used=True)
