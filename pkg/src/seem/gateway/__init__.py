"""Pluggable model gateway: one boundary for every LLM-backed capability."""

from .base import (
    ANSWER_MARKER,
    ExtractionResult,
    GenerationResult,
    LLMGateway,
    load_prompt,
    parse_answer,
    render_passage_for_extraction,
)
from .http import GatewayConfig, HttpGateway
from .mock import MockGateway

__all__ = [
    "ANSWER_MARKER",
    "ExtractionResult",
    "GatewayConfig",
    "GenerationResult",
    "HttpGateway",
    "LLMGateway",
    "MockGateway",
    "load_prompt",
    "parse_answer",
    "render_passage_for_extraction",
]
