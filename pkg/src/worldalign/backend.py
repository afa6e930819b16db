"""Minimal text-completion client for the external backend seat.

One endpoint, text in / text out: POST {"prompt": ...} and read back
{"completion": ...}.  Endpoint and credential come from arguments or the
WORLDALIGN_BACKEND_URL / WORLDALIGN_BACKEND_TOKEN environment variables.
Malformed replies get exactly one retry before raising.
"""
from __future__ import annotations

import json
import os
import urllib.error
import urllib.request
from importlib import resources

from .world_model import BackendUnavailable

ENV_URL = "WORLDALIGN_BACKEND_URL"
ENV_TOKEN = "WORLDALIGN_BACKEND_TOKEN"


def load_prompt(name: str) -> str:
    """Load a prompt asset shipped with the package (prompts/<name>.txt)."""
    return resources.files("worldalign").joinpath(f"prompts/{name}.txt").read_text()


class CompletionClient:
    def __init__(self, url: str | None = None, token: str | None = None, timeout: float = 30.0):
        self.url = url or os.environ.get(ENV_URL, "")
        self.token = token or os.environ.get(ENV_TOKEN, "")
        self.timeout = timeout
        if not self.url:
            raise BackendUnavailable(f"no backend endpoint configured (set {ENV_URL})")

    def complete(self, prompt: str) -> str:
        last_error = "empty reply"
        for _ in range(2):  # one retry on malformed output
            try:
                reply = self._post(prompt)
            except (urllib.error.URLError, OSError, TimeoutError) as exc:
                last_error = str(exc)
                continue
            completion = reply.get("completion")
            if isinstance(completion, str) and completion:
                return completion
            last_error = f"reply missing completion field: {str(reply)[:120]}"
        raise BackendUnavailable(last_error)

    def _post(self, prompt: str) -> dict:
        payload = json.dumps({"prompt": prompt}).encode()
        request = urllib.request.Request(
            self.url,
            data=payload,
            headers={
                "Content-Type": "application/json",
                **({"Authorization": f"Bearer {self.token}"} if self.token else {}),
            },
        )
        with urllib.request.urlopen(request, timeout=self.timeout) as response:
            body = response.read().decode()
        try:
            return json.loads(body)
        except json.JSONDecodeError:
            return {}
