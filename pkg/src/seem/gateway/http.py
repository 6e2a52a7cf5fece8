"""HTTP gateway for chat-completion-compatible endpoints.

All six capabilities run through one bounded-parallelism budget and one
retry policy (exponential backoff with jitter, then a typed failure). Every
response is schema-validated before anything reaches a store, so an invalid
payload can never corrupt memory.
"""

from __future__ import annotations

import json
import logging
import os
import random
import threading
import time
from dataclasses import dataclass

import numpy as np
import requests

from ..errors import (
    ConfigError,
    ExtractionFailure,
    FusionFailure,
    GatewayError,
    GenerationFailure,
    JudgeFailure,
)
from ..model import Passage, QuadDraft, SemanticRoleEvent, TemporalValidity
from ..times import normalize_date_text
from .base import (
    ExtractionResult,
    GenerationResult,
    LLMGateway,
    load_prompt,
    parse_answer,
    render_passage_for_extraction,
)

logger = logging.getLogger(__name__)

ENV_LLM_URL = "SEEM_LLM_URL"
ENV_LLM_KEY = "SEEM_LLM_KEY"
ENV_LLM_MODEL = "SEEM_LLM_MODEL"
ENV_EMB_URL = "SEEM_EMB_URL"
ENV_EMB_KEY = "SEEM_EMB_KEY"
ENV_EMB_MODEL = "SEEM_EMB_MODEL"


@dataclass(frozen=True)
class GatewayConfig:
    """Transport configuration; secrets come from the environment."""

    endpoint_url: str
    api_key: str
    model_name: str
    embedding_url: str
    embedding_key: str
    embedding_model: str
    request_timeout: float = 60.0
    max_retries: int = 3
    max_parallel_requests: int = 4
    backoff_base: float = 0.5

    def __post_init__(self) -> None:
        if self.request_timeout <= 0:
            raise ConfigError("request_timeout must be positive")
        if self.max_retries < 0:
            raise ConfigError("max_retries must be non-negative")
        if self.max_parallel_requests < 1:
            raise ConfigError("max_parallel_requests must be positive")

    @classmethod
    def from_env(cls, **overrides) -> "GatewayConfig":
        env = os.environ
        values = dict(
            endpoint_url=env.get(ENV_LLM_URL, ""),
            api_key=env.get(ENV_LLM_KEY, ""),
            model_name=env.get(ENV_LLM_MODEL, ""),
            embedding_url=env.get(ENV_EMB_URL, ""),
            embedding_key=env.get(ENV_EMB_KEY, env.get(ENV_LLM_KEY, "")),
            embedding_model=env.get(ENV_EMB_MODEL, ""),
        )
        values.update(overrides)
        if not values["endpoint_url"]:
            raise ConfigError(f"{ENV_LLM_URL} is not set")
        if not values["embedding_url"]:
            raise ConfigError(f"{ENV_EMB_URL} is not set")
        return cls(**values)


def _requests_transport(url: str, headers: dict, payload: dict, timeout: float):
    response = requests.post(url, headers=headers, json=payload, timeout=timeout)
    return response.status_code, response.json()


class HttpGateway(LLMGateway):
    """Gateway speaking the chat-completions and embeddings wire formats.

    `transport` and `sleep` are injectable for tests; the defaults use
    requests and time.sleep.
    """

    def __init__(self, config: GatewayConfig, embedding_dim: int | None = None,
                 transport=None, sleep=None):
        self.config = config
        self.embedding_dim = embedding_dim or 0  # pinned on first embed when not given
        self._transport = transport or _requests_transport
        self._sleep = sleep or time.sleep
        self._slots = threading.Semaphore(config.max_parallel_requests)
        self._jitter = random.Random()
        self._prompts = {
            "extract": load_prompt("frame_extraction_v1.txt"),
            "quadruples": load_prompt("quadruple_extraction_v1.txt"),
            "judge": load_prompt("same_event_judge_v1.txt"),
            "fuse": load_prompt("frame_fusion_v1.txt"),
            "answer": load_prompt("answer_generation_v1.txt"),
        }

    def fingerprint(self) -> str:
        return (
            f"http:v1:model={self.config.model_name}"
            f":emb={self.config.embedding_model}:dim={self.embedding_dim}"
        )

    # -- transport ----------------------------------------------------------

    def _post(self, url: str, key: str, payload: dict, failure: type[GatewayError]) -> dict:
        headers = {"Content-Type": "application/json"}
        if key:
            headers["Authorization"] = f"Bearer {key}"
        last_error: Exception | None = None
        for attempt in range(self.config.max_retries + 1):
            if attempt:
                delay = self.config.backoff_base * (2 ** (attempt - 1))
                self._sleep(delay + self._jitter.uniform(0, self.config.backoff_base))
            try:
                with self._slots:
                    status, body = self._transport(url, headers, payload,
                                                   self.config.request_timeout)
                if status == 200 and isinstance(body, dict):
                    return body
                last_error = failure(f"HTTP {status} from {url}")
            except failure:
                raise
            except Exception as exc:  # transport or JSON decode fault
                last_error = exc
            logger.warning("gateway attempt %d/%d failed: %r",
                           attempt + 1, self.config.max_retries + 1, last_error)
        raise failure(f"gateway gave up after {self.config.max_retries + 1} attempts: {last_error}")

    def _chat(self, system: str, user: str, failure: type[GatewayError]) -> str:
        payload = {
            "model": self.config.model_name,
            "messages": [
                {"role": "system", "content": system},
                {"role": "user", "content": user},
            ],
            "temperature": 0.0,
        }
        body = self._post(self.config.endpoint_url, self.config.api_key, payload, failure)
        try:
            content = body["choices"][0]["message"]["content"]
        except (KeyError, IndexError, TypeError):
            raise failure(f"malformed chat completion payload: {body!r}") from None
        if not isinstance(content, str):
            raise failure("completion content is not text")
        return content

    def _chat_json(self, system: str, user: str, failure: type[GatewayError]) -> dict:
        """Chat round-trip whose reply must parse as a JSON object; retries on garbage."""
        last_error: Exception | None = None
        for attempt in range(self.config.max_retries + 1):
            content = self._chat(system, user, failure)
            try:
                data = json.loads(_strip_fences(content))
            except json.JSONDecodeError as exc:
                last_error = exc
                continue
            if isinstance(data, dict):
                return data
            last_error = failure(f"expected a JSON object, got {type(data).__name__}")
        raise failure(f"no valid JSON after {self.config.max_retries + 1} attempts: {last_error}")

    # -- capabilities ---------------------------------------------------------

    def extract_frame(self, passage: Passage) -> ExtractionResult:
        if not passage.text.strip():
            raise ExtractionFailure("empty passage text")
        data = self._chat_json(self._prompts["extract"],
                               render_passage_for_extraction(passage), ExtractionFailure)
        return _validate_extraction(data)

    def extract_quadruples(self, text: str, reference_time=None) -> list[QuadDraft]:
        if not text.strip():
            raise ExtractionFailure("empty text")
        user = text if reference_time is None else f"[reference time: {reference_time.isoformat()}]\n{text}"
        data = self._chat_json(self._prompts["quadruples"], user, ExtractionFailure)
        return _validate_quadruples(data)

    def judge_same_event(self, candidate, previous) -> bool:
        user = json.dumps(
            {"memory_a": _frame_payload(candidate), "memory_b": _frame_payload(previous)},
            ensure_ascii=True, sort_keys=True,
        )
        data = self._chat_json(self._prompts["judge"], user, JudgeFailure)
        verdict = data.get("same_event")
        if not isinstance(verdict, bool):
            raise JudgeFailure(f"judge payload missing boolean same_event: {data!r}")
        return verdict

    def fuse_frames(self, candidate, previous, sources: list[Passage]) -> ExtractionResult:
        originals = "\n".join(render_passage_for_extraction(p) for p in sources)
        user = json.dumps(
            {
                "memory_a": _frame_payload(previous),
                "memory_b": _frame_payload(candidate),
                "original_passages": originals,
            },
            ensure_ascii=True, sort_keys=True,
        )
        data = self._chat_json(self._prompts["fuse"], user, FusionFailure)
        try:
            return _validate_extraction(data)
        except ExtractionFailure as exc:
            raise FusionFailure(str(exc)) from None

    def generate_answer(self, query: str, context) -> GenerationResult:
        user = f"Question: {query}\n\n{context.serialized}"
        content = self._chat(self._prompts["answer"], user, GenerationFailure)
        return parse_answer(content)

    def judge_answer_correct(self, query: str, gold: str, prediction: str) -> bool:
        """Correctness judge built on the shipped multi-dimensional prompt."""
        from importlib import resources

        prompt = resources.files("seem").joinpath(
            "resources", "correctness_judge_v1.txt").read_text(encoding="utf-8")
        user = json.dumps(
            {"question": query, "reference": gold, "response": prediction},
            ensure_ascii=True, sort_keys=True,
        )
        data = self._chat_json(prompt, user, JudgeFailure)
        verdict = data.get("correct")
        if not isinstance(verdict, bool):
            raise JudgeFailure(f"correctness payload missing boolean: {data!r}")
        return verdict

    def embed(self, text: str) -> np.ndarray:
        if not text.strip():
            raise ExtractionFailure("cannot embed empty text")
        payload = {"model": self.config.embedding_model, "input": [text]}
        body = self._post(self.config.embedding_url, self.config.embedding_key,
                          payload, ExtractionFailure)
        try:
            raw = body["data"][0]["embedding"]
            vec = np.asarray(raw, dtype=np.float64)
        except (KeyError, IndexError, TypeError, ValueError):
            raise ExtractionFailure(f"malformed embedding payload: {body!r}") from None
        if vec.ndim != 1 or vec.size == 0:
            raise ExtractionFailure("embedding is not a non-empty vector")
        if self.embedding_dim == 0:
            self.embedding_dim = int(vec.size)
        elif vec.size != self.embedding_dim:
            raise ExtractionFailure(
                f"embedding dim {vec.size} != configured {self.embedding_dim}")
        norm = float(np.linalg.norm(vec))
        if norm == 0.0:
            raise ExtractionFailure("embedding has zero norm")
        return vec / norm


def _strip_fences(content: str) -> str:
    text = content.strip()
    if text.startswith("```"):
        text = text.split("\n", 1)[1] if "\n" in text else ""
        if text.rstrip().endswith("```"):
            text = text.rstrip()[:-3]
    return text.strip()


def _frame_payload(frame) -> dict:
    return {
        "summary": frame.summary,
        "events": [
            {
                "participants": list(e.participants),
                "action": list(e.actions),
                "time": e.time,
                "location": e.location,
                "reason": e.causality,
                "method": e.manner,
            }
            for e in frame.events
        ],
    }


def _validate_extraction(data: dict) -> ExtractionResult:
    summary = data.get("summary")
    if not isinstance(summary, str) or not summary.strip():
        raise ExtractionFailure("extraction payload missing summary")
    raw_events = data.get("events")
    if not isinstance(raw_events, list) or not raw_events:
        raise ExtractionFailure("extraction payload missing events")
    events = []
    for raw in raw_events:
        if not isinstance(raw, dict):
            raise ExtractionFailure("event is not an object")
        participants = _string_list(raw.get("participants"), "participants")
        actions = _string_list(raw.get("action", raw.get("actions")), "action")
        if not participants and not actions:
            raise ExtractionFailure("event has neither participants nor actions")
        try:
            events.append(SemanticRoleEvent(
                participants=participants,
                actions=actions,
                time=_optional_string(raw.get("time"), "time"),
                location=_optional_string(raw.get("location"), "location"),
                causality=_optional_string(raw.get("reason", raw.get("causality")), "reason"),
                manner=_optional_string(raw.get("method", raw.get("manner")), "method"),
            ))
        except ValueError as exc:
            raise ExtractionFailure(str(exc)) from None
    return ExtractionResult(summary=summary.strip(), events=tuple(events))


def _validate_quadruples(data: dict) -> list[QuadDraft]:
    raw_quads = data.get("quadruples")
    if raw_quads is None:
        raise ExtractionFailure("quadruple payload missing 'quadruples'")
    if not isinstance(raw_quads, list):
        raise ExtractionFailure("'quadruples' is not a list")
    drafts = []
    for raw in raw_quads:
        if not isinstance(raw, dict):
            raise ExtractionFailure("quadruple is not an object")
        subject = raw.get("subject")
        relation = raw.get("relation")
        obj = raw.get("object", "")
        if not isinstance(subject, str) or not subject.strip():
            raise ExtractionFailure("quadruple missing subject")
        if not isinstance(relation, str) or not relation.strip():
            raise ExtractionFailure("quadruple missing relation")
        if not isinstance(obj, str):
            raise ExtractionFailure("quadruple object is not text")
        time_text = _optional_string(raw.get("time"), "time")
        temporal = None
        if time_text is not None:
            temporal = TemporalValidity(raw=time_text, normalized=normalize_date_text(time_text))
        if not obj.strip():
            continue  # relation without an object carries no usable edge
        drafts.append(QuadDraft(subject=subject.strip(), relation=relation.strip(),
                                object=obj.strip(), temporal=temporal))
    return drafts


def _string_list(value, what: str) -> tuple[str, ...]:
    if value is None:
        return ()
    if not isinstance(value, list) or any(not isinstance(v, str) for v in value):
        raise ExtractionFailure(f"{what} must be a list of strings")
    return tuple(v.strip() for v in value if v.strip())


def _optional_string(value, what: str) -> str | None:
    if value is None:
        return None
    if not isinstance(value, str):
        raise ExtractionFailure(f"{what} must be text or null")
    stripped = value.strip()
    return stripped if stripped else None
