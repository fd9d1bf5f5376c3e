"""Chat-completion transports and the per-extraction transcript."""

import base64
import json
import logging
import mimetypes
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import requests
from loguru import logger

from riscv_supplychain.exceptions import EndpointError

logging.getLogger("urllib3").setLevel(logging.WARNING)

REDACTED = "***"


@dataclass
class EndpointConfig:
    """Connection settings of an OpenAI-compatible chat endpoint.

    Parameters
    ----------
    base_url : str
        API root, e.g. "http://localhost:8000/v1".
    api_key : str
        Sent as a bearer token when non-empty. Never shown in reprs.
    model_name : str
    temperature : float
    timeout : float
        Seconds per request.
    max_retries : int
        Re-prompts after an unparseable answer.
    """

    base_url: str
    api_key: str = field(default="", repr=False)
    model_name: str = ""
    temperature: float = 0.0
    timeout: float = 60.0
    max_retries: int = 3

    def __post_init__(self):
        if not self.base_url:
            raise ValueError("Endpoint base_url must not be empty")
        if self.max_retries < 0:
            raise ValueError(
                f"max_retries must be >= 0, not {self.max_retries}"
            )


def image_content(path):
    """Chat content part carrying an image as a base64 data URL."""
    path = Path(path)
    mime = mimetypes.guess_type(path.name)[0] or "image/png"
    payload = base64.b64encode(path.read_bytes()).decode("ascii")
    return {
        "type": "image_url",
        "image_url": {"url": f"data:{mime};base64,{payload}"},
    }


class OpenAIChatTransport:
    """POSTs chat messages to ``<base_url>/chat/completions``."""

    def __init__(self, config, session=None):
        self.config = config
        self.session = session or requests.Session()

    @property
    def max_retries(self):
        return self.config.max_retries

    def complete(self, messages):
        url = self.config.base_url.rstrip("/") + "/chat/completions"
        headers = {"Content-Type": "application/json"}
        if self.config.api_key:
            headers["Authorization"] = f"Bearer {self.config.api_key}"
        payload = {
            "model": self.config.model_name,
            "messages": messages,
            "temperature": self.config.temperature,
        }

        logger.debug(f"POST {url} ({len(messages)} messages)")
        try:
            response = self.session.post(
                url, json=payload, headers=headers, timeout=self.config.timeout
            )
        except requests.exceptions.RequestException as e:
            raise EndpointError(f"Could not reach {url}: {e}") from e

        if not response.ok:
            raise EndpointError(
                f"{url} answered {response.status_code}: "
                f"{response.text[:200]}"
            )
        try:
            content = response.json()["choices"][0]["message"]["content"]
        except (ValueError, KeyError, IndexError, TypeError) as e:
            raise EndpointError(
                f"Unexpected chat-completions response from {url}"
            ) from e

        if isinstance(content, list):
            content = "".join(
                part.get("text", "")
                for part in content
                if isinstance(part, dict)
            )
        return content or ""


class ReplayTransport:
    """Answers with scripted responses, in order. Keeps every request it
    receives in ``calls``.
    """

    def __init__(self, responses, max_retries=3):
        self.responses = list(responses)
        self.calls = []
        self.max_retries = max_retries

    @classmethod
    def from_files(cls, paths, max_retries=3):
        return cls(
            [Path(p).read_text(encoding="utf-8") for p in paths], max_retries
        )

    def complete(self, messages):
        self.calls.append(messages)
        if len(self.calls) > len(self.responses):
            raise EndpointError(
                f"Replay exhausted after {len(self.responses)} responses"
            )
        return self.responses[len(self.calls) - 1]


class OfflineTransport:
    """Refuses every request."""

    max_retries = 0

    def complete(self, messages):
        raise EndpointError("Network access is disabled for this command")


# ------------------------------- #
#   TRANSCRIPT                    #
# ------------------------------- #


@dataclass(frozen=True)
class TranscriptEntry:
    attempt: int
    request: list
    response: str
    outcome: str
    wall_time: float


class Transcript:
    """Append-only record of the attempts of one extraction."""

    def __init__(self, secrets=()):
        self._entries = []
        self._secrets = [s for s in secrets if s]

    def _redact(self, value):
        if isinstance(value, str):
            for secret in self._secrets:
                value = value.replace(secret, REDACTED)
            return value
        if isinstance(value, list):
            return [self._redact(v) for v in value]
        if isinstance(value, dict):
            return {k: self._redact(v) for k, v in value.items()}
        return value

    def record(self, attempt, request, response, outcome, started):
        entry = TranscriptEntry(
            attempt=attempt,
            request=self._redact(json.loads(json.dumps(request))),
            response=self._redact(response),
            outcome=self._redact(outcome),
            wall_time=round(time.monotonic() - started, 6),
        )
        self._entries.append(entry)
        return entry

    @property
    def entries(self):
        return tuple(self._entries)

    def __len__(self):
        return len(self._entries)

    def __iter__(self):
        return iter(self._entries)

    def to_jsonl(self):
        return "".join(
            json.dumps(asdict(entry), ensure_ascii=False) + "\n"
            for entry in self._entries
        )

    def write(self, path):
        """Append the entries to a JSON-lines file."""
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "a", encoding="utf-8", newline="\n") as f:
            f.write(self.to_jsonl())
