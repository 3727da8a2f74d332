"""Pluggable scoring endpoints.

External quality-estimation and judge models are reached only through this
interface: a scorer is either a named local function or a remote HTTP
endpoint. Scores are clamped into the endpoint's declared range; a failed
score is reported as None so callers can route the record to an "unscored"
bucket instead of dropping it.

Wire format for remote_http scorers:
    POST <url>  {"name": <scorer name>, "items": [<item>, ...]}
    -> 200      {"scores": [<number or null>, ...]}
Items are JSON objects, typically {"source", "hypothesis", "reference"}.
An Authorization header is sent when MTFORGE_SCORER_TOKEN is set.
"""

from __future__ import annotations

import os
from dataclasses import dataclass
from typing import Callable, Mapping, Sequence

import requests

from .errors import ValidationError

Item = dict
ScoreFn = Callable[[Item], float]

_LOCAL_SCORERS: dict[str, ScoreFn] = {}


def register_scorer(name: str, fn: ScoreFn) -> None:
    """Register a local scoring function (mainly for tests and extensions)."""
    _LOCAL_SCORERS[name] = fn


def _length_ratio(item: Item) -> float:
    source = item.get("source") or ""
    hypothesis = item.get("hypothesis") or ""
    if not source or not hypothesis:
        return 0.0
    a, b = len(source), len(hypothesis)
    return min(a, b) / max(a, b)


def _chrf_item(item: Item) -> float:
    from .evalkit import chrf  # local import: evalkit depends on this module

    return chrf(item.get("hypothesis") or "", item["reference"])


register_scorer("length_ratio", _length_ratio)
register_scorer("chrf", _chrf_item)


@dataclass(frozen=True)
class ScorerEndpoint:
    """A named scorer: local function id or remote HTTP URL, plus its scale.

    `extra` rides along in every remote request (under "config"), which is
    how judge-style scorers receive their prompt template; no judging logic
    lives in this package.
    """

    name: str
    kind: str  # "local_function" | "remote_http"
    config: str  # function id for local, URL for remote
    score_range: tuple[float, float] = (0.0, 1.0)
    timeout_ms: int = 30000
    extra: Mapping[str, object] | None = None

    def __post_init__(self):
        if self.kind not in ("local_function", "remote_http"):
            raise ValidationError(f"scorer kind must be local_function or remote_http, got {self.kind!r}")
        lo, hi = self.score_range
        if not lo < hi:
            raise ValidationError(f"empty score range {self.score_range}")

    def _clamp(self, value: float) -> float:
        lo, hi = self.score_range
        return min(max(float(value), lo), hi)

    def _local_fn(self) -> ScoreFn:
        if self.config.startswith("constant:"):
            value = float(self.config.split(":", 1)[1])
            return lambda item: value
        if self.config not in _LOCAL_SCORERS:
            raise ValidationError(f"unknown local scorer {self.config!r}")
        return _LOCAL_SCORERS[self.config]

    def score_many(self, items: Sequence[Item]) -> list[float | None]:
        """One score per item, None where scoring failed."""
        if self.kind == "local_function":
            fn = self._local_fn()
            out: list[float | None] = []
            for item in items:
                try:
                    out.append(self._clamp(fn(item)))
                except Exception:
                    out.append(None)
            return out
        return self._score_remote(items)

    def _score_remote(self, items: Sequence[Item]) -> list[float | None]:
        headers = {}
        token = os.environ.get("MTFORGE_SCORER_TOKEN")
        if token:
            headers["Authorization"] = f"Bearer {token}"
        payload: dict = {"name": self.name, "items": list(items)}
        if self.extra:
            payload["config"] = dict(self.extra)
        try:
            resp = requests.post(
                self.config,
                json=payload,
                headers=headers,
                timeout=self.timeout_ms / 1000.0,
            )
            resp.raise_for_status()
            scores = resp.json()["scores"]
        except Exception:
            return [None] * len(items)
        if not isinstance(scores, list) or len(scores) != len(items):
            return [None] * len(items)
        return [self._clamp(s) if isinstance(s, (int, float)) else None for s in scores]

    def score_one(self, item: Item) -> float | None:
        return self.score_many([item])[0]


def scorer_from_obj(obj: dict) -> ScorerEndpoint:
    """Build an endpoint from its JSON form (see the config schemas)."""
    try:
        return ScorerEndpoint(
            name=obj["name"],
            kind=obj["kind"],
            config=obj["config"],
            score_range=tuple(obj.get("score_range", (0.0, 1.0))),
            timeout_ms=obj.get("timeout_ms", 30000),
            extra=obj.get("extra"),
        )
    except KeyError as exc:
        raise ValidationError(f"scorer config missing field {exc}") from exc
