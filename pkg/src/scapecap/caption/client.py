"""Chat-completion client with retries, plus test transports.

The wire format is the common chat-completion JSON body::

    {"model": ..., "messages": [{"role": "system", ...}, {"role": "user", ...}],
     "max_tokens": 200, "temperature": 0}

A *transport* is any callable ``(request: dict, config) -> (status, body)``.
:class:`HTTPTransport` posts to a real endpoint; :class:`StubTransport`
answers locally for tests and offline runs.
"""

import hashlib
import json
import logging
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

from ..errors import AuthError, EmptyResponseError, LLMError, RateLimitError, TransientLLMError
from .prompt import PromptPackage

logger = logging.getLogger(__name__)


@dataclass
class ClientConfig:
    endpoint: str = "https://api.openai.com/v1/chat/completions"
    model: str = "gpt-3.5-turbo"
    api_key_env: str = "LLM_API_KEY"
    temperature: float = 0.0
    timeout_s: float = 60.0
    max_attempts: int = 3
    backoff_s: float = 1.0
    max_in_flight: int = 4


@dataclass
class SoundscapeCaption:
    clip_id: str
    text: str
    model_id: str
    template_version: str
    prompt_digest: str
    attempts: int
    response_meta: dict = field(default_factory=dict)

    def to_record(self, prompt: PromptPackage):
        return {"clip_id": self.clip_id, "text": self.text, "model_id": self.model_id,
                "template_version": self.template_version, "prompt_digest": self.prompt_digest,
                "attempts": self.attempts, "response_meta": self.response_meta, "prompt": prompt.to_dict()}


def build_request(prompt: PromptPackage, config: ClientConfig):
    return {
        "model": config.model,
        "messages": [{"role": "system", "content": prompt.system_text},
                     {"role": "user", "content": prompt.user_text}],
        "max_tokens": prompt.max_output_tokens,
        "temperature": config.temperature,
    }


class HTTPTransport:
    """POST over HTTPS with a bearer credential read from the environment."""

    def __init__(self, session=None):
        import requests

        self._requests = requests
        self.session = session or requests.Session()

    def __call__(self, request, config: ClientConfig):
        key = os.environ.get(config.api_key_env)
        if not key:
            raise AuthError(f"environment variable {config.api_key_env} holds no credential")
        try:
            resp = self.session.post(config.endpoint, json=request, timeout=config.timeout_s,
                                     headers={"Authorization": f"Bearer {key}"})
        except (self._requests.Timeout, self._requests.ConnectionError) as exc:
            raise TransientLLMError(str(exc)) from None
        try:
            body = resp.json()
        except ValueError:
            body = {"error": resp.text[:500]}
        return resp.status_code, body


class StubTransport:
    """Local stand-in for a chat-completion service.

    ``mode="echo"`` answers with the user message, ``mode="empty"`` with an
    empty string.  ``failures`` is a list of HTTP statuses returned (in
    order) before the normal answer.
    """

    def __init__(self, mode="echo", failures=()):
        self.mode = mode
        self.failures = list(failures)
        self.calls = 0

    def __call__(self, request, config):
        self.calls += 1
        if self.failures:
            return self.failures.pop(0), {"error": "stub failure"}
        user = next(m["content"] for m in request["messages"] if m["role"] == "user")
        content = user if self.mode == "echo" else ""
        digest = hashlib.sha256(json.dumps(request, sort_keys=True).encode()).hexdigest()[:12]
        return 200, {"id": f"stub-{digest}", "model": request["model"],
                     "choices": [{"index": 0, "message": {"role": "assistant", "content": content},
                                  "finish_reason": "stop"}]}


def _content(body):
    try:
        return body["choices"][0]["message"]["content"] or ""
    except (KeyError, IndexError, TypeError):
        return ""


def generate_caption(prompt: PromptPackage, config: ClientConfig = ClientConfig(), transport=None, clip_id="",
                     sleep=time.sleep):
    """Send one prompt; retry rate limits and transient failures.

    Up to ``config.max_attempts`` attempts, waiting ``backoff_s * 2**(n-1)``
    seconds after failed attempt ``n``.
    """
    transport = transport or HTTPTransport()
    request = build_request(prompt, config)
    last_error = None
    for attempt in range(1, config.max_attempts + 1):
        try:
            status, body = transport(request, config)
        except TransientLLMError as exc:
            status, body, last_error = None, None, exc
        if status in (401, 403):
            raise AuthError(f"endpoint rejected the credential (HTTP {status})")
        if status == 200:
            text = _content(body).strip()
            if not text:
                raise EmptyResponseError(f"empty completion for clip {clip_id!r}")
            meta = {k: body[k] for k in ("id", "model", "usage") if k in body}
            meta["finish_reason"] = body["choices"][0].get("finish_reason")
            return SoundscapeCaption(clip_id, text, body.get("model", config.model), prompt.template_version,
                                     prompt.digest, attempt, meta)
        if status == 429:
            last_error = RateLimitError(f"rate limited after {attempt} attempts")
        elif status is not None and status >= 500:
            last_error = TransientLLMError(f"HTTP {status}")
        elif status is not None:
            raise LLMError(f"unexpected HTTP {status}: {str(body)[:200]}")
        logger.warning("caption request for %r failed (attempt %d): %s", clip_id, attempt, last_error)
        if attempt < config.max_attempts:
            sleep(config.backoff_s * 2 ** (attempt - 1))
    raise last_error


def generate_captions(items, config: ClientConfig = ClientConfig(), transport=None, sleep=time.sleep):
    """Caption ``(clip_id, prompt)`` pairs with at most ``max_in_flight``
    concurrent requests; results keep input order."""
    transport = transport or HTTPTransport()
    items = list(items)
    with ThreadPoolExecutor(max_workers=max(1, config.max_in_flight)) as pool:
        futures = [pool.submit(generate_caption, p, config, transport, cid, sleep) for cid, p in items]
        return [f.result() for f in futures]


def write_caption_records(path, captions, prompts):
    """Line-delimited caption records, each with the prompt that produced it."""
    with open(path, "w", encoding="utf-8") as fh:
        for cap, prompt in zip(captions, prompts):
            if cap.template_version != prompt.template_version or cap.prompt_digest != prompt.digest:
                raise ValueError(f"caption for {cap.clip_id!r} does not match its prompt")
            fh.write(json.dumps(cap.to_record(prompt), sort_keys=True) + "\n")
