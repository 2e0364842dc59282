"""Domain types shared by the backend, pipeline and evaluation layers.

Everything here is an immutable value object. Serialization helpers
(``to_dict`` / ``from_dict``) produce plain JSON-compatible structures so the
transcript archive can round-trip losslessly.
"""

from __future__ import annotations

import hashlib
import json
import re
from collections.abc import Iterable, Mapping
from dataclasses import dataclass, field, replace
from decimal import Decimal, InvalidOperation
from enum import Enum
from typing import Any

from .errors import ValidationError

DEFAULT_ANSWER_MARKER = "FINAL ANSWER:"


class TaskKind(str, Enum):
    ARITHMETIC = "arithmetic"
    COMMONSENSE = "commonsense"
    ETHICS = "ethics"
    LOGIC_PUZZLE = "logic_puzzle"
    CUSTOM = "custom"


# Report row order for task kinds.
TASK_KIND_ORDER: tuple[TaskKind, ...] = tuple(TaskKind)


class MatchMode(str, Enum):
    EXACT = "exact"
    NORMALIZED = "normalized"
    NUMERIC = "numeric"


class Stage(str, Enum):
    INITIAL = "initial"
    REFINED = "refined"


class Method(str, Enum):
    COT = "cot"
    MCOT = "mcot"
    PRCOT = "prcot"


def parse_decimal(text: str) -> Decimal | None:
    """Parse ``text`` as a finite decimal, or return None."""
    try:
        value = Decimal(text.strip())
    except (InvalidOperation, ValueError):
        return None
    return value if value.is_finite() else None


@dataclass(frozen=True)
class GoldLabel:
    canonical_answer: str
    acceptable_aliases: tuple[str, ...] = ()
    match_mode: MatchMode = MatchMode.NORMALIZED

    def __post_init__(self) -> None:
        object.__setattr__(self, "match_mode", MatchMode(self.match_mode))
        object.__setattr__(self, "acceptable_aliases", tuple(self.acceptable_aliases))
        if not self.canonical_answer:
            raise ValidationError("gold.canonical_answer must be nonempty")
        if self.match_mode is MatchMode.NUMERIC and parse_decimal(self.canonical_answer) is None:
            raise ValidationError(
                f"gold.canonical_answer {self.canonical_answer!r} is not a decimal number"
            )

    def to_dict(self) -> dict[str, Any]:
        return {
            "canonical_answer": self.canonical_answer,
            "aliases": list(self.acceptable_aliases),
            "match_mode": self.match_mode.value,
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> GoldLabel:
        return cls(
            canonical_answer=data["canonical_answer"],
            acceptable_aliases=tuple(data.get("aliases", ())),
            match_mode=MatchMode(data.get("match_mode", MatchMode.NORMALIZED.value)),
        )


@dataclass(frozen=True)
class TaskInstance:
    """One query together with its task kind and optional gold label."""

    id: str
    kind: TaskKind
    query: str
    gold: GoldLabel | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "kind", TaskKind(self.kind))
        if not self.id:
            raise ValidationError("task id must be nonempty")
        if not self.query.strip():
            raise ValidationError(f"task {self.id!r}: query is empty")

    def to_dict(self) -> dict[str, Any]:
        out: dict[str, Any] = {"id": self.id, "kind": self.kind.value, "query": self.query}
        if self.gold is not None:
            out["gold"] = self.gold.to_dict()
        return out

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> TaskInstance:
        gold = data.get("gold")
        return cls(
            id=data["id"],
            kind=TaskKind(data["kind"]),
            query=data["query"],
            gold=GoldLabel.from_dict(gold) if gold is not None else None,
        )


# --------------------------------------------------------------------------
# Perspectives
# --------------------------------------------------------------------------

BUILTIN_PERSPECTIVES: tuple[str, ...] = ("v1", "v2", "v3", "v4")

PERSPECTIVE_LABELS: dict[str, str] = {
    "v1": "Logical Consistency",
    "v2": "Information Completeness",
    "v3": "Bias and Ethical Consideration",
    "v4": "Alternative Solutions",
}

_CUSTOM_PREFIX = "custom:"
_CUSTOM_NAME = re.compile(r"^[A-Za-z0-9_.-]+$")


@dataclass(frozen=True)
class PerspectiveId:
    """A reflection angle: one of ``v1``..``v4`` or ``custom:<name>``."""

    tag: str

    def __post_init__(self) -> None:
        if self.tag in BUILTIN_PERSPECTIVES:
            return
        if self.tag.startswith(_CUSTOM_PREFIX) and _CUSTOM_NAME.match(self.tag[len(_CUSTOM_PREFIX):]):
            return
        raise ValidationError(f"invalid perspective tag {self.tag!r}")

    @classmethod
    def custom(cls, name: str) -> PerspectiveId:
        return cls(_CUSTOM_PREFIX + name)

    @classmethod
    def parse(cls, text: str | PerspectiveId) -> PerspectiveId:
        if isinstance(text, PerspectiveId):
            return text
        return cls(text)

    @property
    def is_builtin(self) -> bool:
        return self.tag in BUILTIN_PERSPECTIVES

    @property
    def name(self) -> str:
        return self.tag if self.is_builtin else self.tag[len(_CUSTOM_PREFIX):]

    @property
    def label(self) -> str:
        return PERSPECTIVE_LABELS.get(self.tag, self.name)

    def sort_key(self) -> tuple[int, str]:
        if self.is_builtin:
            return (0, self.tag)
        return (1, self.name)

    def __str__(self) -> str:
        return self.tag


V1, V2, V3, V4 = (PerspectiveId(t) for t in BUILTIN_PERSPECTIVES)
ALL_BUILTIN: tuple[PerspectiveId, ...] = (V1, V2, V3, V4)


def canonical_perspective_order(ids: Iterable[PerspectiveId | str]) -> list[PerspectiveId]:
    """Order perspectives as v1, v2, v3, v4, then customs by name.

    Raises ValidationError on duplicates.
    """
    parsed = [PerspectiveId.parse(p) for p in ids]
    if len(set(parsed)) != len(parsed):
        dupes = sorted({p.tag for p in parsed if parsed.count(p) > 1})
        raise ValidationError(f"duplicate perspective ids: {', '.join(dupes)}")
    return sorted(parsed, key=PerspectiveId.sort_key)


# --------------------------------------------------------------------------
# Reasoning artifacts and answer extraction
# --------------------------------------------------------------------------


def extract_answer(text: str, marker: str = DEFAULT_ANSWER_MARKER) -> str | None:
    """Return the text after the last ``marker`` up to end of line, trimmed.

    Returns None when the marker is absent or followed by nothing on its line.
    """
    if not marker:
        raise ValidationError("answer marker must be nonempty")
    idx = text.rfind(marker)
    if idx < 0:
        return None
    value = text[idx + len(marker):].split("\n", 1)[0].strip()
    return value or None


@dataclass(frozen=True)
class ReasoningArtifact:
    """A chain-of-thought text and the answer extracted from it.

    ``answer_fallback`` is set only on refined artifacts whose text carried no
    answer marker; ``answer`` then holds the initial stage's answer.
    """

    cot_text: str
    answer: str | None
    stage: Stage = Stage.INITIAL
    answer_fallback: bool = False

    def __post_init__(self) -> None:
        object.__setattr__(self, "stage", Stage(self.stage))
        if self.answer_fallback and self.stage is not Stage.REFINED:
            raise ValidationError("answer fallback is only valid on refined artifacts")

    @classmethod
    def from_text(
        cls, text: str, marker: str = DEFAULT_ANSWER_MARKER, stage: Stage = Stage.INITIAL
    ) -> ReasoningArtifact:
        return cls(cot_text=text, answer=extract_answer(text, marker), stage=stage)

    def to_dict(self) -> dict[str, Any]:
        return {
            "cot_text": self.cot_text,
            "answer": self.answer,
            "stage": self.stage.value,
            "answer_fallback": self.answer_fallback,
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> ReasoningArtifact:
        return cls(
            cot_text=data["cot_text"],
            answer=data.get("answer"),
            stage=Stage(data["stage"]),
            answer_fallback=bool(data.get("answer_fallback", False)),
        )


# --------------------------------------------------------------------------
# Usage, sampling, configuration
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class Usage:
    """Tokens and latency (seconds) of one completion call."""

    prompt_tokens: int = 0
    completion_tokens: int = 0
    latency: float = 0.0

    def __post_init__(self) -> None:
        if self.prompt_tokens < 0 or self.completion_tokens < 0 or self.latency < 0:
            raise ValidationError(f"usage fields must be nonnegative: {self}")

    @property
    def total_tokens(self) -> int:
        return self.prompt_tokens + self.completion_tokens

    def __add__(self, other: Usage) -> Usage:
        return Usage(
            self.prompt_tokens + other.prompt_tokens,
            self.completion_tokens + other.completion_tokens,
            self.latency + other.latency,
        )

    def to_dict(self) -> dict[str, Any]:
        return {
            "prompt_tokens": self.prompt_tokens,
            "completion_tokens": self.completion_tokens,
            "latency": self.latency,
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> Usage:
        return cls(int(data["prompt_tokens"]), int(data["completion_tokens"]), float(data["latency"]))


@dataclass(frozen=True)
class SamplingParams:
    temperature: float = 0.0
    max_tokens: int | None = None
    seed: int | None = 0

    def __post_init__(self) -> None:
        if self.temperature < 0:
            raise ValidationError("sampling.temperature must be >= 0")
        if self.max_tokens is not None and self.max_tokens <= 0:
            raise ValidationError("sampling.max_tokens must be positive")

    def to_dict(self) -> dict[str, Any]:
        return {"temperature": self.temperature, "max_tokens": self.max_tokens, "seed": self.seed}

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> SamplingParams:
        return cls(
            temperature=float(data.get("temperature", 0.0)),
            max_tokens=data.get("max_tokens"),
            seed=data.get("seed", 0),
        )


BACKEND_KINDS = ("remote", "mock", "replay")


@dataclass(frozen=True)
class BackendSpec:
    """Where completions come from. Credentials never live here."""

    kind: str = "mock"
    model: str = "mock-model"
    base_url: str | None = None
    timeout: float = 60.0
    max_retries: int = 3
    cache: bool = False
    cache_path: str | None = None
    record_path: str | None = None
    replay_path: str | None = None
    script_path: str | None = None
    mock_latency: float = 0.0

    def __post_init__(self) -> None:
        if self.kind not in BACKEND_KINDS:
            raise ValidationError(f"backend.kind must be one of {BACKEND_KINDS}, got {self.kind!r}")
        if not self.model:
            raise ValidationError("backend.model must be nonempty")
        if self.max_retries < 0:
            raise ValidationError("backend.max_retries must be >= 0")

    def to_dict(self) -> dict[str, Any]:
        return {k: getattr(self, k) for k in self.__dataclass_fields__}

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> BackendSpec:
        unknown = set(data) - set(cls.__dataclass_fields__)
        if unknown:
            raise ValidationError(f"unknown backend field(s): {', '.join(sorted(unknown))}")
        return cls(**dict(data))


@dataclass(frozen=True)
class PipelineConfig:
    """Method, active perspectives, backend and sampling for one run.

    ``prcot`` with no perspectives is accepted and reduces to ``cot``.
    """

    method: Method = Method.PRCOT
    active_perspectives: tuple[PerspectiveId, ...] = ALL_BUILTIN
    backend: BackendSpec = field(default_factory=BackendSpec)
    sampling: SamplingParams = field(default_factory=SamplingParams)
    answer_marker: str = DEFAULT_ANSWER_MARKER
    synthesis_rounds: int = 1
    reflection_workers: int = 4

    def __post_init__(self) -> None:
        method = Method(self.method)
        object.__setattr__(self, "method", method)
        ordered = tuple(canonical_perspective_order(self.active_perspectives))
        object.__setattr__(self, "active_perspectives", ordered)
        if method is Method.COT and ordered:
            raise ValidationError("method=cot takes no perspectives")
        if method is Method.MCOT and len(ordered) != 1:
            raise ValidationError("method=mcot takes exactly one perspective")
        if not self.answer_marker:
            raise ValidationError("answer_marker must be nonempty")
        if self.synthesis_rounds != 1:
            raise ValidationError("only single-round synthesis is supported")
        if self.reflection_workers < 1:
            raise ValidationError("reflection_workers must be >= 1")

    @classmethod
    def cot(cls, **kw: Any) -> PipelineConfig:
        return cls(method=Method.COT, active_perspectives=(), **kw)

    @classmethod
    def mcot(cls, perspective: PerspectiveId | str = V1, **kw: Any) -> PipelineConfig:
        return cls(method=Method.MCOT, active_perspectives=(PerspectiveId.parse(perspective),), **kw)

    @classmethod
    def prcot(cls, perspectives: Iterable[PerspectiveId | str] = ALL_BUILTIN, **kw: Any) -> PipelineConfig:
        return cls(
            method=Method.PRCOT,
            active_perspectives=tuple(PerspectiveId.parse(p) for p in perspectives),
            **kw,
        )

    def with_perspectives(self, method: Method, perspectives: Iterable[PerspectiveId]) -> PipelineConfig:
        return replace(self, method=method, active_perspectives=tuple(perspectives))

    def to_dict(self) -> dict[str, Any]:
        return {
            "method": self.method.value,
            "active_perspectives": [p.tag for p in self.active_perspectives],
            "backend": self.backend.to_dict(),
            "sampling": self.sampling.to_dict(),
            "answer_marker": self.answer_marker,
            "synthesis_rounds": self.synthesis_rounds,
            "reflection_workers": self.reflection_workers,
        }


def config_fingerprint(config: PipelineConfig, prompt_texts: Mapping[str, str]) -> str:
    """Digest of everything that determines a run's model inputs.

    The method label is left out on purpose: ``prcot`` with no perspectives
    and ``cot`` issue identical calls and share a fingerprint. Backend kind and
    file paths are transport details and are excluded too.
    """
    payload = {
        "perspectives": [p.tag for p in config.active_perspectives],
        "model": config.backend.model,
        "sampling": config.sampling.to_dict(),
        "answer_marker": config.answer_marker,
        "synthesis_rounds": config.synthesis_rounds,
        "prompts": dict(sorted(prompt_texts.items())),
    }
    blob = json.dumps(payload, sort_keys=True, ensure_ascii=False).encode("utf-8")
    return hashlib.sha256(blob).hexdigest()


# --------------------------------------------------------------------------
# Transcripts
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class ReflectionCritique:
    perspective: PerspectiveId
    text: str
    usage: Usage

    def to_dict(self) -> dict[str, Any]:
        return {"perspective": self.perspective.tag, "text": self.text, "usage": self.usage.to_dict()}

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> ReflectionCritique:
        return cls(PerspectiveId(data["perspective"]), data["text"], Usage.from_dict(data["usage"]))


@dataclass(frozen=True)
class CallRecord:
    """One model call as seen by the pipeline."""

    purpose: str
    prompt: str
    completion: str
    usage: Usage
    backend: str
    cache_hit: bool = False

    def to_dict(self) -> dict[str, Any]:
        return {
            "purpose": self.purpose,
            "prompt": self.prompt,
            "completion": self.completion,
            "usage": self.usage.to_dict(),
            "backend": self.backend,
            "cache_hit": self.cache_hit,
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> CallRecord:
        return cls(
            purpose=data["purpose"],
            prompt=data["prompt"],
            completion=data["completion"],
            usage=Usage.from_dict(data["usage"]),
            backend=data["backend"],
            cache_hit=bool(data.get("cache_hit", False)),
        )


@dataclass(frozen=True)
class StageFailure:
    stage: str
    error_type: str
    message: str

    def to_dict(self) -> dict[str, Any]:
        return {"stage": self.stage, "error_type": self.error_type, "message": self.message}

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> StageFailure:
        return cls(data["stage"], data["error_type"], data["message"])


@dataclass(frozen=True)
class RunTranscript:
    """Complete record of one pipeline execution on one task.

    ``created_at`` and ``wall_time`` are run metadata and are kept out of
    :meth:`record_dict` so archives compare byte-for-byte across reruns.
    """

    task_id: str
    method: Method
    label: str
    fingerprint: str
    active_perspectives: tuple[PerspectiveId, ...]
    initial: ReasoningArtifact | None
    critiques: tuple[ReflectionCritique, ...]
    final: ReasoningArtifact | None
    calls: tuple[CallRecord, ...]
    failure: StageFailure | None = None
    wall_time: float = 0.0
    created_at: str = ""

    @property
    def ok(self) -> bool:
        return self.failure is None

    @property
    def per_call_usage(self) -> list[Usage]:
        return [c.usage for c in self.calls]

    @property
    def total_usage(self) -> Usage:
        total = Usage()
        for u in self.per_call_usage:
            total = total + u
        return total

    @property
    def synthesis_fallback(self) -> bool:
        return self.final is not None and self.final.answer_fallback

    def record_dict(self) -> dict[str, Any]:
        return {
            "task_id": self.task_id,
            "method": self.method.value,
            "label": self.label,
            "fingerprint": self.fingerprint,
            "active_perspectives": [p.tag for p in self.active_perspectives],
            "initial": self.initial.to_dict() if self.initial else None,
            "critiques": [c.to_dict() for c in self.critiques],
            "final": self.final.to_dict() if self.final else None,
            "calls": [c.to_dict() for c in self.calls],
            "failure": self.failure.to_dict() if self.failure else None,
        }

    def to_dict(self) -> dict[str, Any]:
        out = self.record_dict()
        out["meta"] = {"wall_time": self.wall_time, "created_at": self.created_at}
        return out

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> RunTranscript:
        meta = data.get("meta", {})
        return cls(
            task_id=data["task_id"],
            method=Method(data["method"]),
            label=data["label"],
            fingerprint=data["fingerprint"],
            active_perspectives=tuple(PerspectiveId(p) for p in data["active_perspectives"]),
            initial=ReasoningArtifact.from_dict(data["initial"]) if data.get("initial") else None,
            critiques=tuple(ReflectionCritique.from_dict(c) for c in data["critiques"]),
            final=ReasoningArtifact.from_dict(data["final"]) if data.get("final") else None,
            calls=tuple(CallRecord.from_dict(c) for c in data["calls"]),
            failure=StageFailure.from_dict(data["failure"]) if data.get("failure") else None,
            wall_time=float(meta.get("wall_time", 0.0)),
            created_at=meta.get("created_at", ""),
        )


def dumps_record(data: Mapping[str, Any]) -> str:
    """Stable one-line JSON encoding used by every JSONL file we write."""
    return json.dumps(data, sort_keys=True, ensure_ascii=False, separators=(",", ":"))
