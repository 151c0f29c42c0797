"""Agent backends: one call maps (role, structured prompt, schema id) to raw text.

``ScriptedBackend`` answers from a fixture table and an optional rule-based
responder. ``RecordingBackend`` wraps any backend and keeps every exchange;
``ReplayBackend`` plays such a recording back and refuses to drift from it.
``RemoteBackend`` talks to an OpenAI-style chat-completion endpoint.
"""

from __future__ import annotations

import json
import os
import threading
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Callable, Mapping, Optional, Protocol, Sequence

import httpx

ENV_ENDPOINT = "PREVIZ_ENDPOINT"
ENV_MODEL = "PREVIZ_MODEL"
ENV_API_KEY = "PREVIZ_API_KEY"

Responder = Callable[[str, Mapping[str, Any], str], Optional[str]]


class BackendError(RuntimeError):
    pass


class ConfigurationError(RuntimeError):
    pass


class AgentBackend(Protocol):
    def complete(self, role: str, prompt: Mapping[str, Any], schema_id: str) -> str: ...


def _as_text(value: Any) -> str:
    if isinstance(value, str):
        return value
    return json.dumps(value, sort_keys=True)


class ScriptedBackend:
    """Deterministic fixture-driven backend.

    Fixture keys are tried as ``"role|schema"``, then ``"role"``, then
    ``"schema"``. A list value is consumed one item per call, repeating the
    last item once exhausted; other values are returned on every call. Roles
    are matched on their full label first and then on the part before ``:``.
    Unmatched calls go to ``responder``.
    """

    def __init__(self, fixture: Optional[Mapping[str, Any]] = None, responder: Optional[Responder] = None) -> None:
        self._fixture = dict(fixture or {})
        self._responder = responder
        self._cursor: dict[str, int] = {}
        self._lock = threading.Lock()

    def _keys(self, role: str, schema_id: str) -> list[str]:
        kind = role.split(":", 1)[0]
        keys = [f"{role}|{schema_id}", role]
        if kind != role:
            keys += [f"{kind}|{schema_id}", kind]
        keys.append(schema_id)
        return keys

    def complete(self, role: str, prompt: Mapping[str, Any], schema_id: str) -> str:
        with self._lock:
            for key in self._keys(role, schema_id):
                if key not in self._fixture:
                    continue
                value = self._fixture[key]
                if isinstance(value, list):
                    if not value:
                        raise BackendError(f"fixture entry {key!r} is empty")
                    i = self._cursor.get(key, 0)
                    self._cursor[key] = i + 1
                    value = value[min(i, len(value) - 1)]
                return _as_text(value)
        if self._responder is not None:
            out = self._responder(role, prompt, schema_id)
            if out is not None:
                return out
        raise BackendError(f"no scripted answer for role {role!r}, schema {schema_id!r}")


@dataclass(frozen=True)
class Exchange:
    role: str
    schema_id: str
    prompt: Mapping[str, Any]
    response: str

    def to_json(self) -> dict:
        return {"role": self.role, "schema_id": self.schema_id, "prompt": self.prompt, "response": self.response}


class RecordingBackend:
    def __init__(self, inner: AgentBackend) -> None:
        self.inner = inner
        self.exchanges: list[Exchange] = []
        self._lock = threading.Lock()

    def complete(self, role: str, prompt: Mapping[str, Any], schema_id: str) -> str:
        out = self.inner.complete(role, prompt, schema_id)
        with self._lock:
            self.exchanges.append(Exchange(role, schema_id, json.loads(json.dumps(prompt, sort_keys=True)), out))
        return out

    def dump(self) -> list[dict]:
        return [e.to_json() for e in self.exchanges]

    def save(self, path: Path) -> None:
        Path(path).write_text(json.dumps({"exchanges": self.dump()}, sort_keys=True, indent=2) + "\n")


class ReplayBackend:
    """Serves recorded responses in order; any change in the call sequence is an error."""

    def __init__(self, exchanges: Sequence[Mapping[str, Any]], check_prompts: bool = True) -> None:
        self._items = [dict(e) for e in exchanges]
        self._i = 0
        self._check_prompts = check_prompts
        self._lock = threading.Lock()

    @classmethod
    def load(cls, path: Path, check_prompts: bool = True) -> "ReplayBackend":
        data = json.loads(Path(path).read_text())
        if not isinstance(data, dict) or not isinstance(data.get("exchanges"), list):
            raise ConfigurationError(f"{path}: not a recorded transcript")
        return cls(data["exchanges"], check_prompts)

    @property
    def remaining(self) -> int:
        return len(self._items) - self._i

    def complete(self, role: str, prompt: Mapping[str, Any], schema_id: str) -> str:
        with self._lock:
            if self._i >= len(self._items):
                raise BackendError(f"recording exhausted at call {self._i + 1} ({role}, {schema_id})")
            item = self._items[self._i]
            self._i += 1
        if item.get("role") != role or item.get("schema_id") != schema_id:
            raise BackendError(
                f"call {self._i} diverged: recorded ({item.get('role')}, {item.get('schema_id')}), "
                f"got ({role}, {schema_id})"
            )
        if self._check_prompts and "prompt" in item:
            if json.loads(json.dumps(prompt, sort_keys=True)) != item["prompt"]:
                raise BackendError(f"call {self._i} diverged: prompt differs from the recording")
        return str(item["response"])


class RemoteBackend:
    """Chat-completion client. One network retry; a 60 s timeout per request."""

    def __init__(
        self,
        endpoint: str,
        model: str,
        api_key: str,
        *,
        timeout: float = 60.0,
        retries: int = 1,
        client: Optional[httpx.Client] = None,
        system_prompts: Optional[Callable[[str, str], str]] = None,
    ) -> None:
        self.endpoint = endpoint
        self.model = model
        self._api_key = api_key
        self.timeout = timeout
        self.retries = retries
        self._client = client or httpx.Client(timeout=timeout)
        self._system_prompts = system_prompts

    @classmethod
    def from_env(cls, env: Optional[Mapping[str, str]] = None, **kwargs: Any) -> "RemoteBackend":
        env = os.environ if env is None else env
        missing = [k for k in (ENV_ENDPOINT, ENV_MODEL, ENV_API_KEY) if not env.get(k)]
        if missing:
            raise ConfigurationError(f"remote backend needs environment variable(s): {', '.join(missing)}")
        return cls(env[ENV_ENDPOINT], env[ENV_MODEL], env[ENV_API_KEY], **kwargs)

    def _messages(self, role: str, prompt: Mapping[str, Any], schema_id: str) -> list[dict]:
        system = prompt.get("instruction") if isinstance(prompt.get("instruction"), str) else None
        if system is None and self._system_prompts is not None:
            system = self._system_prompts(role, schema_id)
        body = {k: v for k, v in prompt.items() if k != "instruction"}
        msgs = []
        if system:
            msgs.append({"role": "system", "content": system})
        msgs.append({"role": "user", "content": json.dumps({"role": role, "schema": schema_id, **body}, sort_keys=True)})
        return msgs

    def complete(self, role: str, prompt: Mapping[str, Any], schema_id: str) -> str:
        payload = {
            "model": self.model,
            "messages": self._messages(role, prompt, schema_id),
            "response_format": {"type": "json_object"},
        }
        headers = {"Authorization": f"Bearer {self._api_key}"}
        last: Optional[Exception] = None
        for _ in range(self.retries + 1):
            try:
                resp = self._client.post(self.endpoint, json=payload, headers=headers, timeout=self.timeout)
            except httpx.TransportError as exc:
                last = exc
                continue
            if resp.status_code >= 500:
                last = BackendError(f"endpoint returned HTTP {resp.status_code}")
                continue
            if resp.status_code >= 400:
                raise BackendError(f"endpoint returned HTTP {resp.status_code}: {resp.text[:200]}")
            try:
                return resp.json()["choices"][0]["message"]["content"]
            except (ValueError, KeyError, IndexError, TypeError) as exc:
                raise BackendError(f"malformed completion response: {exc}") from exc
        raise BackendError(f"remote call failed after {self.retries + 1} attempt(s): {last}")
