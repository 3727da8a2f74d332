"""Text-generation backends behind a minimal completion-style wire protocol.

    POST <endpoint>  {"model", "prompt", "temperature", "top_p",
                      "max_tokens", "seed"}
    -> 200           {"text": <completion>}

Endpoints with a "mock:" scheme resolve to deterministic in-process fakes so
orchestration can run and be tested without any network. An Authorization
header is sent when MTFORGE_BACKEND_TOKEN is set.
"""

from __future__ import annotations

import hashlib
import os
from dataclasses import dataclass, field
from typing import Callable, Optional

import requests

from .errors import MtforgeError, ValidationError


@dataclass(frozen=True)
class GenerationParams:
    temperature: float = 0.7
    top_p: float = 0.95
    max_tokens: int = 1024
    seed: Optional[int] = None

    def __post_init__(self):
        if self.temperature < 0:
            raise ValidationError(f"temperature must be >= 0, got {self.temperature}")
        if not 0 < self.top_p <= 1:
            raise ValidationError(f"top_p must be in (0, 1], got {self.top_p}")
        if self.max_tokens <= 0:
            raise ValidationError(f"max_tokens must be > 0, got {self.max_tokens}")

    def to_obj(self) -> dict:
        return {
            "temperature": self.temperature,
            "top_p": self.top_p,
            "max_tokens": self.max_tokens,
            "seed": self.seed,
        }


@dataclass(frozen=True)
class BackendSpec:
    name: str
    endpoint: str
    model_id: str
    timeout_ms: int = 30000
    max_retries: int = 2

    def __post_init__(self):
        if self.timeout_ms <= 0:
            raise ValidationError(f"timeout_ms must be > 0, got {self.timeout_ms}")
        if self.max_retries < 0:
            raise ValidationError(f"max_retries must be >= 0, got {self.max_retries}")


class BackendFailure(MtforgeError):
    """A completion request failed after exhausting its retries."""


MockFn = Callable[[str, GenerationParams, str], str]
_MOCKS: dict[str, MockFn] = {}


def register_mock_backend(name: str, fn: MockFn) -> None:
    """Install a deterministic fake reachable as endpoint "mock:<name>"."""
    _MOCKS[name] = fn


def _mock_echo(prompt: str, params: GenerationParams, model_id: str) -> str:
    digest = hashlib.sha256(prompt.encode("utf-8")).hexdigest()[:12]
    return f"[{model_id}:{digest}:T{params.temperature:g}:s{params.seed}]"


def _mock_fail(prompt: str, params: GenerationParams, model_id: str) -> str:
    raise BackendFailure("mock backend configured to fail")


register_mock_backend("echo", _mock_echo)
register_mock_backend("fail", _mock_fail)


def complete(spec: BackendSpec, prompt: str, params: GenerationParams) -> str:
    """One completion with retries; raises BackendFailure when exhausted."""
    if spec.endpoint.startswith("mock:"):
        name = spec.endpoint.split(":", 1)[1]
        if name not in _MOCKS:
            raise ValidationError(f"unknown mock backend {name!r}")
        return _MOCKS[name](prompt, params, spec.model_id)

    payload = {
        "model": spec.model_id,
        "prompt": prompt,
        "temperature": params.temperature,
        "top_p": params.top_p,
        "max_tokens": params.max_tokens,
        "seed": params.seed,
    }
    headers = {}
    token = os.environ.get("MTFORGE_BACKEND_TOKEN")
    if token:
        headers["Authorization"] = f"Bearer {token}"
    last_error: Exception | None = None
    for _attempt in range(spec.max_retries + 1):
        try:
            resp = requests.post(
                spec.endpoint, json=payload, headers=headers, timeout=spec.timeout_ms / 1000.0
            )
            resp.raise_for_status()
            body = resp.json()
            if "text" not in body or not isinstance(body["text"], str):
                raise BackendFailure(f"backend {spec.name!r} returned no text field")
            return body["text"]
        except BackendFailure as exc:
            last_error = exc
        except Exception as exc:  # connection errors, bad status, bad JSON
            last_error = exc
    raise BackendFailure(f"backend {spec.name!r} failed after {spec.max_retries + 1} attempts: {last_error}")


def backend_from_obj(obj: dict) -> BackendSpec:
    try:
        return BackendSpec(
            name=obj["name"],
            endpoint=obj["endpoint"],
            model_id=obj["model_id"],
            timeout_ms=obj.get("timeout_ms", 30000),
            max_retries=obj.get("max_retries", 2),
        )
    except KeyError as exc:
        raise ValidationError(f"backend config missing field {exc}") from exc
