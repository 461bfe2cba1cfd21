"""Language-model backends.

A backend answers one stateless ``(system, user)`` prompt pair with text.
Three are provided: an HTTP chat-completion client, a replay backend that
serves recorded completions, and a recorder that wraps another backend and
captures a transcript. The deterministic rule-based backend lives in
``reflect.reason.oracle``.
"""

from __future__ import annotations

import json
import logging
import os
from pathlib import Path
from typing import Protocol

log = logging.getLogger(__name__)


class BackendFailure(RuntimeError):
    pass


class LlmBackend(Protocol):
    def complete(self, system_prompt: str, user_prompt: str) -> str: ...


def _key(system: str, user: str) -> tuple[str, str]:
    return system, user


class ReplayBackend:
    """Serves completions from a transcript of recorded prompt/completion pairs.

    Transcript format: JSON list of ``{"system", "user", "completion"}``.
    A prompt that was never recorded is a hard failure, which is what makes
    replay useful as a regression check.
    """

    def __init__(self, path: str | Path):
        self.path = Path(path)
        try:
            entries = json.loads(self.path.read_text(encoding="utf-8"))
        except (OSError, ValueError) as exc:
            raise BackendFailure(f"cannot read transcript {self.path}: {exc}") from exc
        self.table: dict[tuple[str, str], str] = {}
        for e in entries:
            self.table[_key(e["system"], e["user"])] = e["completion"]

    def complete(self, system_prompt: str, user_prompt: str) -> str:
        try:
            return self.table[_key(system_prompt, user_prompt)]
        except KeyError:
            head = user_prompt.splitlines()[0] if user_prompt else ""
            raise BackendFailure(f"prompt not in transcript {self.path.name}: {head!r}") from None


class RecordingBackend:
    """Wraps a backend and keeps every exchange for later replay."""

    def __init__(self, inner: LlmBackend):
        self.inner = inner
        self.entries: list[dict[str, str]] = []

    def __getattr__(self, name):
        return getattr(self.inner, name)

    def complete(self, system_prompt: str, user_prompt: str) -> str:
        out = self.inner.complete(system_prompt, user_prompt)
        self.entries.append({"system": system_prompt, "user": user_prompt, "completion": out})
        return out

    def save(self, path: str | Path, append: bool = True) -> Path:
        path = Path(path)
        entries = []
        if append and path.is_file():
            entries = json.loads(path.read_text(encoding="utf-8"))
        seen = {(e["system"], e["user"]) for e in entries}
        entries.extend(e for e in self.entries if (e["system"], e["user"]) not in seen)
        path.write_text(json.dumps(entries, indent=1) + "\n", encoding="utf-8")
        return path


class HttpBackend:
    """OpenAI-style ``/chat/completions`` client at temperature 0.

    The API key is read from the environment variable named by ``api_key_env``.
    Transport errors and 5xx responses are retried once.
    """

    def __init__(
        self,
        url: str,
        model: str | None = None,
        api_key_env: str = "REFLECT_API_KEY",
        timeout: float = 60.0,
    ):
        self.url = url
        self.model = model or os.environ.get("REFLECT_MODEL", "gpt-4")
        self.api_key_env = api_key_env
        self.timeout = timeout

    def _post(self, body: dict) -> dict:
        import httpx

        headers = {"Content-Type": "application/json"}
        key = os.environ.get(self.api_key_env)
        if key:
            headers["Authorization"] = f"Bearer {key}"
        resp = httpx.post(self.url, json=body, headers=headers, timeout=self.timeout)
        if resp.status_code >= 500:
            raise httpx.TransportError(f"server error {resp.status_code}")
        if resp.status_code >= 400:
            raise BackendFailure(f"HTTP {resp.status_code}: {resp.text[:200]}")
        return resp.json()

    def complete(self, system_prompt: str, user_prompt: str) -> str:
        import httpx

        body = {
            "model": self.model,
            "temperature": 0,
            "messages": [
                {"role": "system", "content": system_prompt},
                {"role": "user", "content": user_prompt},
            ],
        }
        last: Exception | None = None
        for attempt in range(2):
            try:
                data = self._post(body)
                return data["choices"][0]["message"]["content"]
            except httpx.HTTPError as exc:
                last = exc
                log.warning("backend transport error (attempt %d): %s", attempt + 1, exc)
            except (KeyError, IndexError, TypeError, ValueError) as exc:
                raise BackendFailure(f"malformed completion response: {exc}") from exc
        raise BackendFailure(f"backend unreachable after retry: {last}")


def make_backend(uri: str) -> LlmBackend:
    """``oracle:``, ``replay:<file>`` or an ``http(s)://`` endpoint."""
    if uri == "oracle:" or uri == "oracle":
        from .oracle import OracleBackend

        return OracleBackend()
    if uri.startswith("replay:"):
        return ReplayBackend(uri[len("replay:"):])
    if uri.startswith(("http://", "https://")):
        return HttpBackend(uri)
    raise ValueError(f"unknown backend {uri!r}; expected oracle:, replay:FILE or an http(s) URL")
