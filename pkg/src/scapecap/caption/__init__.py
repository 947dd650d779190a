"""Language-model stage: prompts from predictions, captions from a chat endpoint."""

from .client import (
    ClientConfig, HTTPTransport, SoundscapeCaption, StubTransport, build_request, generate_caption, generate_captions,
    write_caption_records,
)
from .prompt import (
    EVENT_THRESHOLD, MAX_OUTPUT_TOKENS, NO_EVENTS_TEXT, PromptPackage, PromptTemplate, build_prompt, load_template,
    prompt_from_prediction, rank_affect, threshold_events,
)

__all__ = [
    "ClientConfig", "HTTPTransport", "SoundscapeCaption", "StubTransport", "build_request", "generate_caption",
    "generate_captions", "write_caption_records", "EVENT_THRESHOLD", "MAX_OUTPUT_TOKENS", "NO_EVENTS_TEXT",
    "PromptPackage", "PromptTemplate", "build_prompt", "load_template", "prompt_from_prediction", "rank_affect",
    "threshold_events",
]
