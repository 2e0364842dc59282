"""Prompt templates and stage-aware rendering.

Templates are plain UTF-8 files, one per template, under a prompt directory
(``<dir>/<name>.txt``) with an optional ``manifest.yaml`` pinning versions.
Placeholders are ``{query}``, ``{cot}``, ``{critiques}`` and
``{answer_marker}``; any other ``{identifier}`` in a body is rejected.
"""

from __future__ import annotations

import re
from collections.abc import Iterable, Mapping
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import yaml

from .core import (
    ALL_BUILTIN,
    PerspectiveId,
    PipelineConfig,
    ReasoningArtifact,
    ReflectionCritique,
    TaskInstance,
    canonical_perspective_order,
)
from .errors import ContractError, RenderError, ValidationError

PLACEHOLDERS = frozenset({"query", "cot", "critiques", "answer_marker"})
_PLACEHOLDER = re.compile(r"\{([A-Za-z_][A-Za-z0-9_]*)\}")

# stage -> (allowed placeholders, required placeholders)
STAGE_RULES: dict[str, tuple[frozenset[str], frozenset[str]]] = {
    "initial": (frozenset({"query", "answer_marker"}), frozenset({"query"})),
    "reflection": (frozenset({"query", "cot"}), frozenset({"query", "cot"})),
    "synthesis": (PLACEHOLDERS, PLACEHOLDERS),
    "judge": (frozenset({"query", "cot"}), frozenset({"cot"})),
}


@dataclass(frozen=True)
class PromptTemplate:
    name: str
    body: str
    version: int = 1

    def __post_init__(self) -> None:
        unknown = self.placeholders - PLACEHOLDERS
        if unknown:
            raise ValidationError(
                f"template {self.name!r} uses unknown placeholder(s): {', '.join(sorted(unknown))}"
            )
        if self.version < 1:
            raise ValidationError(f"template {self.name!r}: version must be >= 1")

    @property
    def placeholders(self) -> frozenset[str]:
        return frozenset(_PLACEHOLDER.findall(self.body))

    def render(self, stage: str, values: Mapping[str, str]) -> str:
        """Substitute ``values`` in one pass after checking the stage's rules.

        Substituted text is never rescanned, so queries or reasoning that
        contain brace syntax pass through untouched.
        """
        allowed, required = STAGE_RULES[stage]
        used = self.placeholders
        if used - allowed:
            raise RenderError(
                f"template {self.name!r} uses {sorted(used - allowed)} which {stage} rendering cannot bind"
            )
        if required - used:
            raise RenderError(f"template {self.name!r} is missing required {sorted(required - used)}")
        missing = used - values.keys()
        if missing:
            raise RenderError(f"no value bound for {sorted(missing)} in template {self.name!r}")
        return _PLACEHOLDER.sub(lambda m: values[m.group(1)], self.body)


def render_initial(t: PromptTemplate, task: TaskInstance, marker: str) -> str:
    return t.render("initial", {"query": task.query, "answer_marker": marker})


def render_reflection(t: PromptTemplate, task: TaskInstance, initial: ReasoningArtifact) -> str:
    if not initial.cot_text.strip():
        raise RenderError("cannot reflect on an empty chain of thought")
    return t.render("reflection", {"query": task.query, "cot": initial.cot_text})


def critique_label(p: PerspectiveId) -> str:
    return f"[{p.tag} {p.label}]" if p.is_builtin else f"[{p.tag}]"


def format_critiques(critiques: Iterable[ReflectionCritique]) -> str:
    """Labeled critique blocks in canonical perspective order."""
    by_id = {c.perspective: c for c in critiques}
    ordered = canonical_perspective_order([c.perspective for c in critiques])
    if len(by_id) != len(ordered):
        raise ContractError("duplicate critiques for one perspective")
    return "\n\n".join(f"{critique_label(p)}\n{by_id[p].text.strip()}" for p in ordered)


def render_synthesis(
    t: PromptTemplate,
    task: TaskInstance,
    initial: ReasoningArtifact,
    critiques: Iterable[ReflectionCritique],
    marker: str,
) -> str:
    critiques = list(critiques)
    if not critiques:
        raise ContractError("synthesis needs at least one critique")
    return t.render(
        "synthesis",
        {
            "query": task.query,
            "cot": initial.cot_text,
            "critiques": format_critiques(critiques),
            "answer_marker": marker,
        },
    )


def render_judge(t: PromptTemplate, task: TaskInstance | None, cot_text: str) -> str:
    if not cot_text.strip():
        raise RenderError("cannot judge an empty chain of thought")
    values = {"cot": cot_text}
    if task is not None:
        values["query"] = task.query
    return t.render("judge", values)


def reflection_template_name(p: PerspectiveId) -> str:
    return f"reflect_{p.name}"


@dataclass(frozen=True)
class PromptLibrary:
    initial: PromptTemplate
    reflections: Mapping[PerspectiveId, PromptTemplate]
    synthesis: PromptTemplate
    judge: PromptTemplate

    @classmethod
    def load(cls, directory: str | Path | None = None) -> PromptLibrary:
        """Load templates from ``directory`` (default: the bundled set).

        Custom perspective templates are files named ``reflect_<name>.txt``.
        """
        if directory is None:
            root = resources.files("prcot") / "prompts"
        else:
            root = Path(directory)
            if not root.is_dir():
                raise ValidationError(f"prompt directory {root} does not exist")
        versions: dict[str, int] = {}
        manifest = root / "manifest.yaml"
        if manifest.is_file():
            data = yaml.safe_load(manifest.read_text(encoding="utf-8")) or {}
            versions = {str(k): int(v) for k, v in (data.get("templates") or {}).items()}

        def read(name: str) -> PromptTemplate | None:
            f = root / f"{name}.txt"
            if not f.is_file():
                return None
            return PromptTemplate(name, f.read_text(encoding="utf-8").rstrip("\n"), versions.get(name, 1))

        def need(name: str) -> PromptTemplate:
            t = read(name)
            if t is None:
                raise ValidationError(f"prompt directory {root} has no {name}.txt")
            return t

        reflections: dict[PerspectiveId, PromptTemplate] = {}
        for entry in root.iterdir():
            stem = entry.name[:-4] if entry.name.endswith(".txt") else None
            if stem is None or not stem.startswith("reflect_"):
                continue
            name = stem[len("reflect_"):]
            pid = PerspectiveId(name) if name in {p.tag for p in ALL_BUILTIN} else PerspectiveId.custom(name)
            reflections[pid] = need(stem)
        return cls(need("initial"), reflections, need("synthesis"), need("judge"))

    def reflection_for(self, p: PerspectiveId) -> PromptTemplate:
        try:
            return self.reflections[p]
        except KeyError:
            raise ValidationError(f"no reflection template for perspective {p}") from None

    def texts_for(self, config: PipelineConfig) -> dict[str, str]:
        """Bodies of every template a run under ``config`` will render."""
        texts = {"initial": self.initial.body}
        for p in config.active_perspectives:
            texts[reflection_template_name(p)] = self.reflection_for(p).body
        if config.active_perspectives:
            texts["synthesis"] = self.synthesis.body
        return texts

    def versions(self) -> dict[str, int]:
        out = {t.name: t.version for t in (self.initial, self.synthesis, self.judge)}
        out.update({t.name: t.version for t in self.reflections.values()})
        return dict(sorted(out.items()))
