"""Minimal chat-completion HTTP client shared by the synonym oracle and the
style translator.

Talks to any OpenAI-compatible ``/chat/completions`` endpoint: POST a JSON
body with model + messages, read ``choices[0].message.content``. The auth
token comes from an environment variable so it never lands in configs or
output manifests. Bounded retries with exponential backoff on transport
errors and 5xx/429 responses.
"""

from __future__ import annotations

import os
import time

import requests

DEFAULT_TOKEN_ENV = "SEMCOM_LLM_TOKEN"


class LlmUnavailableError(RuntimeError):
    """Endpoint unreachable or persistently failing."""


class ChatCompletionClient:
    def __init__(self, url: str, model: str, token_env: str = DEFAULT_TOKEN_ENV,
                 timeout: float = 30.0, max_retries: int = 3, backoff: float = 2.0):
        self.url = url
        self.model = model
        self.token_env = token_env
        self.timeout = timeout
        self.max_retries = max_retries
        self.backoff = backoff

    def _headers(self) -> dict:
        headers = {"Content-Type": "application/json"}
        token = os.environ.get(self.token_env, "")
        if token:
            headers["Authorization"] = f"Bearer {token}"
        return headers

    def complete(self, messages: list[dict], temperature: float = 0.0,
                 max_tokens: int = 256) -> str:
        """Return the first choice's message content. Raises LlmUnavailableError
        after exhausting retries."""
        body = {
            "model": self.model,
            "messages": messages,
            "temperature": temperature,
            "max_tokens": max_tokens,
        }
        last_error: Exception | None = None
        for attempt in range(self.max_retries):
            try:
                resp = requests.post(self.url, json=body, headers=self._headers(),
                                     timeout=self.timeout)
                if resp.status_code in (429,) or resp.status_code >= 500:
                    raise requests.HTTPError(f"status {resp.status_code}", response=resp)
                resp.raise_for_status()
                payload = resp.json()
                return str(payload["choices"][0]["message"]["content"])
            except (requests.RequestException, KeyError, IndexError, ValueError) as e:
                last_error = e
                if attempt + 1 < self.max_retries:
                    time.sleep(self.backoff * (2 ** attempt))
        raise LlmUnavailableError(
            f"chat endpoint {self.url} failed after {self.max_retries} attempts: {last_error}")


def load_template(name: str) -> str:
    """Load a versioned prompt template bundled with the package."""
    from importlib import resources

    return resources.files("semcom.data.templates").joinpath(f"{name}.txt").read_text()
