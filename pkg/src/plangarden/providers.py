"""Completion and embedding providers.

Two completion implementations behind one contract: a live client speaking an
OpenAI-compatible chat protocol, and a deterministic replay provider scripted
per role tag for tests. No other module builds wire payloads.
"""

from __future__ import annotations

import base64
import hashlib
import json
import math
import os
import struct
import time
import urllib.error
import urllib.request
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional

from .errors import (
    AuthError,
    EmbeddingProviderError,
    NoVisionCapability,
    PreconditionViolation,
    ProviderRefusal,
    ScriptExhausted,
    TransportError,
)

GENERATION_TEMPERATURE = 0.7
EVALUATOR_TEMPERATURE = 0.0


@dataclass
class CompletionRequest:
    system_prompt: str
    messages: list[tuple[str, str]]
    images: list[bytes] = field(default_factory=list)
    temperature: float = GENERATION_TEMPERATURE
    max_tokens: int = 2048
    # routing tag used by replay scripts and request capture; not sent upstream
    role: str = "default"

    def __post_init__(self) -> None:
        if not self.messages:
            raise ValueError("messages must be non-empty")
        if self.temperature < 0:
            raise ValueError("temperature must be >= 0")
        if self.max_tokens < 1:
            raise ValueError("max_tokens must be >= 1")

    def prompt_hash(self) -> str:
        digest = hashlib.sha256()
        digest.update(self.system_prompt.encode("utf-8"))
        for role, text in self.messages:
            digest.update(b"\x00")
            digest.update(role.encode("utf-8"))
            digest.update(b"\x00")
            digest.update(text.encode("utf-8"))
        return digest.hexdigest()


@dataclass
class CompletionResponse:
    text: str
    provider_meta: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if not self.text and not self.provider_meta.get("truncated"):
            raise ProviderRefusal("provider returned empty output")


class CompletionProvider:
    """Base contract. Subclasses implement _complete."""

    supports_vision = False

    def complete(self, request: CompletionRequest) -> CompletionResponse:
        return self._complete(request)

    def complete_vision(self, request: CompletionRequest) -> CompletionResponse:
        if not request.images:
            raise PreconditionViolation("vision completion requires >= 1 image")
        if not self.supports_vision:
            raise NoVisionCapability(type(self).__name__)
        return self._complete(request)

    def _complete(self, request: CompletionRequest) -> CompletionResponse:
        raise NotImplementedError


@dataclass(frozen=True)
class CapturedRequest:
    """What the replay provider saw for one call."""

    role: str
    system_prompt: str
    messages: tuple[tuple[str, str], ...]
    image_count: int
    temperature: float
    prompt_hash: str


class ReplayProvider(CompletionProvider):
    """Deterministic scripted provider.

    Responses are matched FIFO per role tag. Identical call sequences yield
    identical response sequences; every request is captured for inspection.
    """

    supports_vision = True

    def __init__(
        self,
        scripts: Optional[dict[str, list[str]]] = None,
        state_path: Optional[Path] = None,
    ) -> None:
        self.scripts: dict[str, list[str]] = {
            role: list(responses) for role, responses in (scripts or {}).items()
        }
        self.requests: list[CapturedRequest] = []
        self._cursor: dict[str, int] = {}
        self._state_path = state_path
        if state_path is not None and state_path.exists():
            self._cursor.update(json.loads(state_path.read_text()))

    @classmethod
    def from_dir(cls, script_dir: Path, state_path: Optional[Path] = None) -> "ReplayProvider":
        """Load a script directory: one subdirectory per role, files in sorted order."""
        scripts: dict[str, list[str]] = {}
        for role_dir in sorted(p for p in Path(script_dir).iterdir() if p.is_dir()):
            scripts[role_dir.name] = [
                f.read_text() for f in sorted(role_dir.iterdir()) if f.is_file()
            ]
        return cls(scripts, state_path=state_path)

    def remaining(self, role: str) -> int:
        return len(self.scripts.get(role, [])) - self._cursor.get(role, 0)

    def _complete(self, request: CompletionRequest) -> CompletionResponse:
        self.requests.append(
            CapturedRequest(
                role=request.role,
                system_prompt=request.system_prompt,
                messages=tuple(request.messages),
                image_count=len(request.images),
                temperature=request.temperature,
                prompt_hash=request.prompt_hash(),
            )
        )
        queue = self.scripts.get(request.role, [])
        index = self._cursor.get(request.role, 0)
        if index >= len(queue):
            raise ScriptExhausted(
                f"no scripted response left for role '{request.role}' (used {index})"
            )
        self._cursor[request.role] = index + 1
        self._save_state()
        return CompletionResponse(
            text=queue[index],
            provider_meta={"replay_index": index, "role": request.role},
        )

    def _save_state(self) -> None:
        if self._state_path is not None:
            self._state_path.write_text(json.dumps(self._cursor, sort_keys=True))


class LiveProvider(CompletionProvider):
    """OpenAI-compatible chat-completions client over HTTP(S).

    Retries transient transport failures (network errors, 429, 5xx) with
    exponential backoff. Images travel as base64 data URIs.
    """

    supports_vision = True

    def __init__(
        self,
        base_url: str,
        api_key: str = "",
        model: str = "gpt-4o",
        vision_model: Optional[str] = None,
        max_retries: int = 3,
        backoff_base: float = 0.25,
        timeout: float = 120.0,
    ) -> None:
        self.base_url = base_url.rstrip("/")
        self.api_key = api_key
        self.model = model
        self.vision_model = vision_model or model
        self.max_retries = max_retries
        self.backoff_base = backoff_base
        self.timeout = timeout

    @classmethod
    def from_env(cls) -> "LiveProvider":
        base = os.environ.get("LLM_API_BASE")
        if not base:
            raise TransportError("LLM_API_BASE is not set")
        return cls(
            base_url=base,
            api_key=os.environ.get("LLM_API_KEY", ""),
            model=os.environ.get("LLM_MODEL", "gpt-4o"),
            vision_model=os.environ.get("LLM_VISION_MODEL"),
        )

    def _payload(self, request: CompletionRequest) -> dict[str, Any]:
        messages: list[dict[str, Any]] = []
        if request.system_prompt:
            messages.append({"role": "system", "content": request.system_prompt})
        turns = [{"role": role, "content": text} for role, text in request.messages]
        if request.images:
            # attach all images to the last user turn as content parts
            last = turns[-1]
            parts: list[dict[str, Any]] = [{"type": "text", "text": last["content"]}]
            for blob in request.images:
                encoded = base64.b64encode(blob).decode("ascii")
                parts.append(
                    {
                        "type": "image_url",
                        "image_url": {"url": f"data:image/png;base64,{encoded}"},
                    }
                )
            last["content"] = parts
        messages.extend(turns)
        return {
            "model": self.vision_model if request.images else self.model,
            "messages": messages,
            "temperature": request.temperature,
            "max_tokens": request.max_tokens,
        }

    def _complete(self, request: CompletionRequest) -> CompletionResponse:
        body = json.dumps(self._payload(request)).encode("utf-8")
        url = f"{self.base_url}/chat/completions"
        headers = {"Content-Type": "application/json"}
        if self.api_key:
            headers["Authorization"] = f"Bearer {self.api_key}"

        last_error: Exception = TransportError("no attempt made")
        for attempt in range(self.max_retries + 1):
            req = urllib.request.Request(url, data=body, headers=headers, method="POST")
            started = time.monotonic()
            try:
                with urllib.request.urlopen(req, timeout=self.timeout) as resp:
                    raw = resp.read()
                latency = time.monotonic() - started
                return self._parse_response(raw, latency)
            except urllib.error.HTTPError as exc:
                if exc.code in (401, 403):
                    raise AuthError(f"HTTP {exc.code} from provider") from exc
                if exc.code == 429 or exc.code >= 500:
                    last_error = TransportError(f"HTTP {exc.code} from provider")
                else:
                    raise TransportError(f"HTTP {exc.code} from provider") from exc
            except (urllib.error.URLError, TimeoutError, OSError) as exc:
                last_error = TransportError(str(exc))
            if attempt < self.max_retries:
                time.sleep(self.backoff_base * (2**attempt))
        raise last_error

    @staticmethod
    def _parse_response(raw: bytes, latency: float) -> CompletionResponse:
        try:
            doc = json.loads(raw.decode("utf-8"))
            choice = doc["choices"][0]
            text = choice["message"]["content"] or ""
            finish = choice.get("finish_reason")
        except (ValueError, KeyError, IndexError, TypeError) as exc:
            raise TransportError(f"malformed provider response: {exc}") from exc
        meta = {
            "latency_s": round(latency, 4),
            "finish_reason": finish,
            "usage": doc.get("usage", {}),
            "truncated": finish == "length",
        }
        return CompletionResponse(text=text, provider_meta=meta)


# --- embeddings -------------------------------------------------------------

class EmbeddingProvider:
    dim: int

    def embed_text(self, text: str) -> list[float]:
        raise NotImplementedError

    def embed_image(self, data: bytes) -> list[float]:
        raise NotImplementedError


class HashingEmbedder(EmbeddingProvider):
    """Deterministic stand-in: sha256-expanded unit vectors. Test use only."""

    def __init__(self, dim: int = 32) -> None:
        if dim < 1:
            raise ValueError("dim must be >= 1")
        self.dim = dim

    def _expand(self, seed: bytes) -> list[float]:
        values: list[float] = []
        counter = 0
        while len(values) < self.dim:
            block = hashlib.sha256(seed + counter.to_bytes(4, "big")).digest()
            for offset in range(0, 32, 4):
                if len(values) >= self.dim:
                    break
                (word,) = struct.unpack(">I", block[offset : offset + 4])
                values.append(word / 0xFFFFFFFF * 2.0 - 1.0)
            counter += 1
        norm = math.sqrt(sum(v * v for v in values)) or 1.0
        return [v / norm for v in values]

    def embed_text(self, text: str) -> list[float]:
        return self._expand(b"text\x00" + text.encode("utf-8"))

    def embed_image(self, data: bytes) -> list[float]:
        return self._expand(b"image\x00" + data)


class LiveEmbedder(EmbeddingProvider):
    """OpenAI-compatible embeddings endpoint client."""

    def __init__(self, base_url: str, api_key: str = "", model: str = "clip",
                 dim: int = 512, timeout: float = 60.0) -> None:
        self.base_url = base_url.rstrip("/")
        self.api_key = api_key
        self.model = model
        self.dim = dim
        self.timeout = timeout

    @classmethod
    def from_env(cls) -> "LiveEmbedder":
        base = os.environ.get("EMBED_API_BASE")
        if not base:
            raise EmbeddingProviderError("EMBED_API_BASE is not set")
        return cls(base_url=base, api_key=os.environ.get("EMBED_API_KEY", ""))

    def _post(self, payload: dict[str, Any]) -> list[float]:
        body = json.dumps(payload).encode("utf-8")
        headers = {"Content-Type": "application/json"}
        if self.api_key:
            headers["Authorization"] = f"Bearer {self.api_key}"
        req = urllib.request.Request(
            f"{self.base_url}/embeddings", data=body, headers=headers, method="POST"
        )
        try:
            with urllib.request.urlopen(req, timeout=self.timeout) as resp:
                doc = json.loads(resp.read().decode("utf-8"))
            return list(doc["data"][0]["embedding"])
        except (urllib.error.URLError, OSError, ValueError, KeyError, IndexError) as exc:
            raise EmbeddingProviderError(str(exc)) from exc

    def embed_text(self, text: str) -> list[float]:
        return self._post({"model": self.model, "input": [text]})

    def embed_image(self, data: bytes) -> list[float]:
        encoded = base64.b64encode(data).decode("ascii")
        return self._post({"model": self.model, "input": [encoded], "input_type": "image"})
