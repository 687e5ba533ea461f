"""Batch inference against a chat-completion endpoint, and a replay backend
serving recorded responses for offline runs."""

from __future__ import annotations

import enum
import json
import logging
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Mapping, Sequence
from urllib.parse import urlparse

import httpx

from skillkit.promptgen import PromptExample

log = logging.getLogger(__name__)

TRANSIENT_CODES = frozenset({408, 429})


class ConfigError(ValueError):
    pass


class Status(enum.Enum):
    OK = "ok"
    TIMEOUT = "timeout"
    HTTP_ERROR = "http_error"
    EXHAUSTED_RETRIES = "exhausted_retries"


@dataclass(frozen=True)
class EndpointConfig:
    base_url: str
    model_name: str
    api_key_env: str | None = None
    temperature: float = 0.0
    max_output_tokens: int = 1024
    request_timeout: float = 60.0
    max_retries: int = 3
    max_in_flight: int = 4
    backoff_base: float = 0.5
    path: str = "/chat/completions"
    # request body key names, for servers with a different dialect
    fields: Mapping[str, str] = field(
        default_factory=lambda: {
            "model": "model",
            "messages": "messages",
            "temperature": "temperature",
            "max_tokens": "max_tokens",
        }
    )
    response_path: Sequence[str | int] = ("choices", 0, "message", "content")

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "EndpointConfig":
        known = set(cls.__dataclass_fields__)
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown endpoint settings: {sorted(unknown)}")
        data = dict(data)
        if "fields" in data:
            data["fields"] = {**cls.__dataclass_fields__["fields"].default_factory(), **data["fields"]}
        if "response_path" in data:
            data["response_path"] = tuple(data["response_path"])
        return cls(**data)

    def validate(self) -> str | None:
        """Check settings and return the API key (None when unauthenticated)."""
        url = urlparse(self.base_url)
        if url.scheme not in ("http", "https") or not url.netloc:
            raise ConfigError(f"malformed base_url {self.base_url!r}")
        if not self.model_name:
            raise ConfigError("model_name is empty")
        if self.temperature < 0:
            raise ConfigError("temperature must be >= 0")
        if self.max_in_flight < 1:
            raise ConfigError("max_in_flight must be >= 1")
        if self.max_output_tokens < 1:
            raise ConfigError("max_output_tokens must be >= 1")
        if self.max_retries < 0:
            raise ConfigError("max_retries must be >= 0")
        if self.api_key_env is None:
            return None
        key = os.environ.get(self.api_key_env)
        if not key:
            raise ConfigError(f"environment variable {self.api_key_env} is unset or empty")
        return key


@dataclass(frozen=True)
class GenerationRecord:
    id: str
    sentence_id: str
    style: str
    type: str | None
    status: Status
    response: str | None = None
    attempts: int = 0
    latency: float = 0.0
    http_code: int | None = None
    detail: str = ""

    def __post_init__(self) -> None:
        if (self.response is not None) != (self.status is Status.OK):
            raise ValueError("response text must be present iff status is ok")

    def as_json(self) -> dict:
        return {
            "id": self.id,
            "sentence_id": self.sentence_id,
            "style": self.style,
            "type": self.type,
            "status": self.status.value,
            "http_code": self.http_code,
            "response": self.response,
            "attempts": self.attempts,
            "latency": self.latency,
            "detail": self.detail,
        }

    @classmethod
    def from_json(cls, rec: Mapping[str, Any]) -> "GenerationRecord":
        return cls(
            id=rec["id"],
            sentence_id=rec["sentence_id"],
            style=rec["style"],
            type=rec.get("type"),
            status=Status(rec["status"]),
            response=rec.get("response"),
            attempts=rec.get("attempts", 0),
            latency=rec.get("latency", 0.0),
            http_code=rec.get("http_code"),
            detail=rec.get("detail", ""),
        )


def _record(prompt: PromptExample, status: Status, **kw: Any) -> GenerationRecord:
    return GenerationRecord(
        id=prompt.request_id,
        sentence_id=prompt.sentence_id,
        style=prompt.style.value,
        type=prompt.entity_type.key if prompt.entity_type else None,
        status=status,
        **kw,
    )


def _dig(obj: Any, path: Sequence[str | int]) -> Any:
    for step in path:
        obj = obj[step]
    return obj


def _request_body(prompt: PromptExample, config: EndpointConfig) -> dict:
    f = config.fields
    return {
        f["model"]: config.model_name,
        f["messages"]: [
            {"role": "system", "content": prompt.system},
            {"role": "user", "content": prompt.query},
        ],
        f["temperature"]: config.temperature,
        f["max_tokens"]: config.max_output_tokens,
    }


def _call(
    client: httpx.Client,
    prompt: PromptExample,
    config: EndpointConfig,
    sleep: Callable[[float], None],
) -> GenerationRecord:
    body = _request_body(prompt, config)
    attempts = 0
    began = time.perf_counter()
    last_status, last_code, last_detail = Status.TIMEOUT, None, ""
    while attempts <= config.max_retries:
        if attempts:
            sleep(config.backoff_base * 2 ** (attempts - 1))
        attempts += 1
        try:
            resp = client.post(config.path, json=body)
        except httpx.TimeoutException as exc:
            last_status, last_code, last_detail = Status.TIMEOUT, None, str(exc) or "timeout"
            continue
        except httpx.TransportError as exc:
            last_status, last_code, last_detail = Status.HTTP_ERROR, None, str(exc)
            continue
        elapsed = time.perf_counter() - began
        code = resp.status_code
        if code in TRANSIENT_CODES or code >= 500:
            last_status, last_code, last_detail = Status.HTTP_ERROR, code, resp.text[:200]
            continue
        if code >= 400:
            return _record(prompt, Status.HTTP_ERROR, attempts=attempts, latency=elapsed,
                           http_code=code, detail=resp.text[:200])
        try:
            text = _dig(resp.json(), config.response_path)
            if not isinstance(text, str):
                raise TypeError(f"response field is {type(text).__name__}")
        except (ValueError, LookupError, TypeError) as exc:
            return _record(prompt, Status.HTTP_ERROR, attempts=attempts, latency=elapsed,
                           http_code=code, detail=f"unexpected response shape: {exc}")
        return _record(prompt, Status.OK, response=text, attempts=attempts, latency=elapsed, http_code=code)
    log.warning("%s: giving up after %d attempts (%s)", prompt.request_id, attempts, last_detail)
    status = Status.EXHAUSTED_RETRIES if attempts > 1 else last_status
    return _record(prompt, status, attempts=attempts, latency=time.perf_counter() - began,
                   http_code=last_code, detail=last_detail)


def generate_batch(
    prompts: Sequence[PromptExample],
    config: EndpointConfig,
    *,
    transport: httpx.BaseTransport | None = None,
    sleep: Callable[[float], None] = time.sleep,
) -> list[GenerationRecord]:
    """One record per prompt, in input order.

    At most ``config.max_in_flight`` requests are outstanding. Timeouts,
    connection errors, 408/429 and 5xx are retried up to
    ``config.max_retries`` times with exponential backoff; other HTTP errors
    end the prompt immediately.
    """
    key = config.validate()
    if any(p.target is not None for p in prompts):
        raise ValueError("inference prompts must not carry targets")
    headers = {"Authorization": f"Bearer {key}"} if key else {}
    with httpx.Client(
        base_url=config.base_url,
        headers=headers,
        timeout=config.request_timeout,
        transport=transport,
    ) as client:
        with ThreadPoolExecutor(max_workers=config.max_in_flight) as pool:
            return list(pool.map(lambda p: _call(client, p, config, sleep), prompts))


class FixtureError(ValueError):
    pass


class ReplayBackend:
    """Serves recorded responses keyed by request id.

    Fixture rows are ``{"id": ..., "response": ...}``; a row may instead
    carry a non-ok ``status`` to replay a failed call. Ids missing from the
    fixture get ``fallback`` when set.
    """

    def __init__(self, responses: Mapping[str, Mapping[str, Any]], fallback: str | None = None) -> None:
        self._rows = dict(responses)
        self.fallback = fallback

    @classmethod
    def load(cls, path: str | Path, fallback: str | None = None) -> "ReplayBackend":
        rows: dict[str, dict] = {}
        with open(path, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, 1):
                if not line.strip():
                    continue
                try:
                    rec = json.loads(line)
                    rid = rec["id"]
                    status = Status(rec.get("status", "ok"))
                    response = rec.get("response")
                except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
                    raise FixtureError(f"{path}:{lineno}: bad fixture row: {exc}") from None
                if (status is Status.OK) != isinstance(response, str):
                    raise FixtureError(f"{path}:{lineno}: response must be a string iff status is ok")
                if rid in rows:
                    raise FixtureError(f"{path}:{lineno}: duplicate id {rid!r}")
                rows[rid] = {"status": status, "response": response}
        return cls(rows, fallback)

    @classmethod
    def from_pairs(cls, pairs: Mapping[str, str], fallback: str | None = None) -> "ReplayBackend":
        return cls({k: {"status": Status.OK, "response": v} for k, v in pairs.items()}, fallback)

    def complete(self, prompt: PromptExample) -> GenerationRecord:
        row = self._rows.get(prompt.request_id)
        if row is None:
            if self.fallback is None:
                raise FixtureError(f"no recorded response for {prompt.request_id!r}")
            return _record(prompt, Status.OK, response=self.fallback, attempts=1)
        return _record(prompt, row["status"], response=row["response"], attempts=1)

    def generate_batch(self, prompts: Sequence[PromptExample]) -> list[GenerationRecord]:
        if any(p.target is not None for p in prompts):
            raise ValueError("inference prompts must not carry targets")
        return [self.complete(p) for p in prompts]
