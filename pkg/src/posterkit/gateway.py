"""Uniform interface to a layout-generating model.

Two backends share one entry point: a remote multimodal chat endpoint
(chat-completions wire shape, base64 image part) and a deterministic local
mock so the whole pipeline runs with no model at all. Generation wraps the
codec's extraction in a parse -> repair -> retry loop.
"""

from __future__ import annotations

import base64
import logging
import os
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Callable

import requests

from . import codec
from .codec import PromptBundle, RepairLog
from .core import Canvas, Element, LayoutRecord, NormBox
from .metrics.content import SaliencyMask

logger = logging.getLogger(__name__)

CORRECTION_PROMPT = "Return only the JSON object."

MOCK_STACK_LEFT = 0.1
MOCK_STACK_WIDTH = 0.8
MOCK_ELEMENT_HEIGHT = 0.08
MOCK_ELEMENT_GAP = 0.02
MOCK_SALIENCY_CUTOFF = 0.2


class TransportError(Exception):
    """Network/transport failure talking to the remote endpoint."""


class GenerationError(Exception):
    """Every attempt failed; carries the last raw model output."""

    def __init__(self, message: str, raw_text: str = "", attempts: int = 0):
        super().__init__(message)
        self.raw_text = raw_text
        self.attempts = attempts


@dataclass(frozen=True)
class BackendConfig:
    kind: str = "mock"  # "mock" | "remote"
    endpoint: str = ""
    model: str = ""
    max_tokens: int = 4096
    temperature: float = 0.0
    timeout_s: float = 120.0
    retry_limit: int = 2
    auth_env: str = "POSTERKIT_API_TOKEN"
    debug_log: bool = False

    def __post_init__(self):
        if self.kind not in ("mock", "remote"):
            raise ValueError(f"unknown backend kind {self.kind!r}")
        if self.max_tokens < 512:
            raise ValueError(f"max_tokens must be >= 512, got {self.max_tokens}")
        if self.retry_limit < 0:
            raise ValueError(f"retry_limit must be >= 0, got {self.retry_limit}")
        if self.kind == "remote" and not self.endpoint:
            raise ValueError("remote backend needs an endpoint URL")


@dataclass(frozen=True)
class GenerationResult:
    elements: tuple[Element, ...]
    repair_log: RepairLog
    raw_text: str
    attempts: int
    latency_ms: float


def _band_start(saliency: SaliencyMask) -> float:
    """Normalized top of the tallest horizontal band of low-saliency rows.

    A row qualifies when its mean saliency is below MOCK_SALIENCY_CUTOFF;
    with no qualifying band the whole canvas is used (top 0.0). Ties go to
    the topmost band.
    """
    row_means = saliency.values.mean(axis=1)
    best_start, best_len = 0, 0
    run_start, run_len = 0, 0
    for y, mean in enumerate(row_means):
        if mean < MOCK_SALIENCY_CUTOFF:
            if run_len == 0:
                run_start = y
            run_len += 1
            if run_len > best_len:
                best_start, best_len = run_start, run_len
        else:
            run_len = 0
    if best_len == 0:
        return 0.0
    return best_start / saliency.height_px


def mock_generate(bundle: PromptBundle, saliency: SaliencyMask | None = None) -> list[Element]:
    """Deterministic vertical-stack layout for the requested labels.

    Elements are 0.8 wide (left 0.1), 0.08 tall with 0.02 gaps, stacked
    top-aligned at the start of the emptiest saliency band (canvas top when
    no mask is given). If the stack would run past the bottom, element
    heights compress uniformly to fit.
    """
    n = bundle.expected_n
    if n == 0:
        return []
    top = _band_start(saliency) if saliency is not None else 0.0
    height = MOCK_ELEMENT_HEIGHT
    gap = MOCK_ELEMENT_GAP
    available = 1.0 - top
    total = n * height + (n - 1) * gap
    if total > available:
        height = (available - (n - 1) * gap) / n
        if height * MOCK_STACK_WIDTH < 2e-3:
            # too many elements for gap-preserving compression; shrink everything
            scale = available / total
            height = MOCK_ELEMENT_HEIGHT * scale
            gap = MOCK_ELEMENT_GAP * scale
    elements = []
    for i, label in enumerate(bundle.expected_labels):
        y = top + i * (height + gap)
        elements.append(
            Element(
                category=label,
                box=NormBox(MOCK_STACK_LEFT, y, MOCK_STACK_LEFT + MOCK_STACK_WIDTH, y + height),
            )
        )
    return elements


def mock_reply_text(bundle: PromptBundle, saliency: SaliencyMask | None = None) -> str:
    """The mock backend's full chat reply: prefix prose plus schema-perfect JSON."""
    record = LayoutRecord(
        id="mock",
        canvas=Canvas(1, 1),
        elements=tuple(mock_generate(bundle, saliency)),
    )
    return codec.ASSISTANT_PREFIX + codec.serialize(record)


def _encode_image(image: bytes | str | Path) -> str:
    data = image if isinstance(image, bytes) else Path(image).read_bytes()
    return base64.b64encode(data).decode("ascii")


def build_messages(bundle: PromptBundle, image: bytes | str | Path | None = None) -> list[dict]:
    messages: list[dict] = []
    if bundle.system_text:
        messages.append({"role": "system", "content": bundle.system_text})
    if image is not None:
        content = [
            {
                "type": "image_url",
                "image_url": {"url": f"data:image/png;base64,{_encode_image(image)}"},
            },
            {"type": "text", "text": bundle.user_text},
        ]
    else:
        content = bundle.user_text
    messages.append({"role": "user", "content": content})
    return messages


def _post_chat(messages: list[dict], config: BackendConfig) -> str:
    """POST a chat-completions request and return the assistant text."""
    headers = {"Content-Type": "application/json"}
    token = os.environ.get(config.auth_env, "")
    if token:
        headers["Authorization"] = f"Bearer {token}"
    body = {
        "model": config.model,
        "messages": messages,
        "max_tokens": config.max_tokens,
        "temperature": config.temperature,
    }
    if config.debug_log:
        redacted = {k: ("<redacted>" if k == "Authorization" else v) for k, v in headers.items()}
        logger.debug("POST %s headers=%s body=%s", config.endpoint, redacted, body)
    try:
        response = requests.post(
            config.endpoint, json=body, headers=headers, timeout=config.timeout_s
        )
        response.raise_for_status()
        payload = response.json()
    except requests.RequestException as exc:
        raise TransportError(f"request to {config.endpoint} failed: {exc}") from exc
    try:
        text = payload["choices"][0]["message"]["content"]
    except (KeyError, IndexError, TypeError) as exc:
        raise TransportError(f"unexpected response shape: {payload!r}") from exc
    if config.debug_log:
        logger.debug("response text: %s", text)
    return str(text)


Transport = Callable[[list[dict], BackendConfig], str]


def generate(
    bundle: PromptBundle,
    config: BackendConfig,
    image: bytes | str | Path | None = None,
    saliency: SaliencyMask | None = None,
    policy: codec.ExtractPolicy = "lenient",
    transport: Transport | None = None,
) -> GenerationResult:
    """Send the prompt, extract the layout, retry with a correction on failure.

    Retries append the failed reply and CORRECTION_PROMPT to a copy of the
    conversation; the original bundle is never mutated. Raises
    GenerationError after retry_limit + 1 failed attempts.
    """
    if transport is None:
        if config.kind == "mock":
            transport = lambda messages, cfg: mock_reply_text(bundle, saliency)  # noqa: E731
        else:
            transport = _post_chat
    messages = build_messages(bundle, image if config.kind == "remote" else None)
    started = time.perf_counter()
    last_raw = ""
    attempts = 0
    for _ in range(config.retry_limit + 1):
        raw = transport(messages, config)
        attempts += 1
        last_raw = raw
        try:
            elements, repair_log = codec.extract(raw, bundle, policy)
        except (codec.ExtractionError, codec.ReconciliationError) as exc:
            logger.debug("attempt %d failed to extract: %s", attempts, exc)
            messages = messages + [
                {"role": "assistant", "content": raw},
                {"role": "user", "content": CORRECTION_PROMPT},
            ]
            continue
        return GenerationResult(
            elements=tuple(elements),
            repair_log=repair_log,
            raw_text=raw,
            attempts=attempts,
            latency_ms=(time.perf_counter() - started) * 1000.0,
        )
    raise GenerationError(
        f"no layout extracted after {attempts} attempt(s)",
        raw_text=last_raw,
        attempts=attempts,
    )
