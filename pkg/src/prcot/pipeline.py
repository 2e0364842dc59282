"""Three-stage reflective reasoning: initial CoT, perspective critiques, synthesis.

The CoT and single-reflection baselines are the same protocol with zero or one
active perspective.
"""

from __future__ import annotations

import logging
import time
from collections.abc import Callable, Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from datetime import datetime, timezone

from .backend import Backend, CompletionRequest, purpose_tag
from .core import (
    CallRecord,
    Method,
    PerspectiveId,
    PipelineConfig,
    ReasoningArtifact,
    ReflectionCritique,
    RunTranscript,
    Stage,
    StageFailure,
    TaskInstance,
    canonical_perspective_order,
    config_fingerprint,
    extract_answer,
)
from .errors import ContractError, PRCoTError
from .prompts import PromptLibrary, render_initial, render_reflection, render_synthesis

log = logging.getLogger(__name__)


def expected_calls(config: PipelineConfig) -> int:
    n = len(config.active_perspectives)
    return 1 + n + (1 if n else 0)


class _StageError(Exception):
    def __init__(self, stage: str, cause: Exception) -> None:
        super().__init__(f"{stage}: {cause}")
        self.stage = stage
        self.cause = cause


@dataclass
class _CallLog:
    records: list[CallRecord] = field(default_factory=list)


class Pipeline:
    """Runs one configuration against a backend and a prompt library."""

    def __init__(
        self,
        backend: Backend,
        config: PipelineConfig,
        prompts: PromptLibrary | None = None,
        *,
        label: str | None = None,
    ) -> None:
        self.backend = backend
        self.config = config
        self.prompts = prompts if prompts is not None else PromptLibrary.load()
        self.label = label or config.method.value
        self.fingerprint = config_fingerprint(config, self.prompts.texts_for(config))

    def _call(self, prompt: str, purpose: str) -> CallRecord:
        req = CompletionRequest.single(self.config.backend.model, prompt, self.config.sampling, purpose)
        res = self.backend.complete(req)
        return CallRecord(purpose, prompt, res.text, res.usage, res.backend, res.cache_hit)

    def generate_initial(self, task: TaskInstance, _log: _CallLog | None = None) -> ReasoningArtifact:
        prompt = render_initial(self.prompts.initial, task, self.config.answer_marker)
        rec = self._call(prompt, purpose_tag("initial"))
        if _log is not None:
            _log.records.append(rec)
        return ReasoningArtifact.from_text(rec.completion, self.config.answer_marker, Stage.INITIAL)

    def reflect_all(
        self,
        task: TaskInstance,
        initial: ReasoningArtifact,
        _log: _CallLog | None = None,
        perspectives: Sequence[PerspectiveId] | None = None,
    ) -> list[ReflectionCritique]:
        """One independent critique per active perspective, in canonical order.

        Any failing reflection fails the whole stage.
        """
        active = canonical_perspective_order(
            self.config.active_perspectives if perspectives is None else perspectives
        )
        if not active:
            raise ContractError("reflect_all needs at least one active perspective")
        prompts = [
            (p, render_reflection(self.prompts.reflection_for(p), task, initial)) for p in active
        ]

        def one(item: tuple[PerspectiveId, str]) -> CallRecord:
            p, prompt = item
            return self._call(prompt, purpose_tag("reflection", p))

        workers = min(self.config.reflection_workers, len(prompts))
        if workers > 1:
            with ThreadPoolExecutor(max_workers=workers) as pool:
                records = list(pool.map(one, prompts))
        else:
            records = [one(item) for item in prompts]
        if _log is not None:
            _log.records.extend(records)
        return [ReflectionCritique(p, r.completion, r.usage) for (p, _), r in zip(prompts, records)]

    def synthesize(
        self,
        task: TaskInstance,
        initial: ReasoningArtifact,
        critiques: Sequence[ReflectionCritique],
        _log: _CallLog | None = None,
    ) -> ReasoningArtifact:
        """Refine the initial reasoning; fall back to the initial answer if no marker."""
        prompt = render_synthesis(
            self.prompts.synthesis, task, initial, critiques, self.config.answer_marker
        )
        rec = self._call(prompt, purpose_tag("synthesis"))
        if _log is not None:
            _log.records.append(rec)
        answer = extract_answer(rec.completion, self.config.answer_marker)
        if answer is None and initial.answer is not None:
            return ReasoningArtifact(rec.completion, initial.answer, Stage.REFINED, answer_fallback=True)
        return ReasoningArtifact(rec.completion, answer, Stage.REFINED)

    def run(self, task: TaskInstance) -> RunTranscript:
        """Execute every stage for ``task``; stage errors land in the transcript."""
        created_at = datetime.now(timezone.utc).isoformat()
        start = time.perf_counter()
        calls = _CallLog()
        initial: ReasoningArtifact | None = None
        critiques: list[ReflectionCritique] = []
        final: ReasoningArtifact | None = None
        failure: StageFailure | None = None
        try:
            initial = self._stage("initial", lambda: self.generate_initial(task, calls))
            if self.config.active_perspectives:
                critiques = self._stage("reflection", lambda: self.reflect_all(task, initial, calls))
                final = self._stage("synthesis", lambda: self.synthesize(task, initial, critiques, calls))
            else:
                final = initial
        except _StageError as err:
            failure = StageFailure(err.stage, type(err.cause).__name__, str(err.cause))
            log.warning("task %s failed at %s: %s", task.id, err.stage, err.cause)
        return RunTranscript(
            task_id=task.id,
            method=self.config.method,
            label=self.label,
            fingerprint=self.fingerprint,
            active_perspectives=self.config.active_perspectives,
            initial=initial,
            critiques=tuple(critiques),
            final=final,
            calls=tuple(calls.records),
            failure=failure,
            wall_time=time.perf_counter() - start,
            created_at=created_at,
        )

    @staticmethod
    def _stage(name: str, fn: Callable):
        try:
            return fn()
        except PRCoTError as exc:
            raise _StageError(name, exc) from exc

    def run_many(
        self,
        tasks: Sequence[TaskInstance],
        parallel: int = 1,
        progress: Callable[[RunTranscript], None] | None = None,
    ) -> list[RunTranscript]:
        """Run every task; results keep dataset order whatever the parallelism."""

        def go(task: TaskInstance) -> RunTranscript:
            t = self.run(task)
            if progress is not None:
                progress(t)
            return t

        if parallel <= 1:
            return [go(t) for t in tasks]
        with ThreadPoolExecutor(max_workers=parallel) as pool:
            return list(pool.map(go, tasks))


def run(task: TaskInstance, config: PipelineConfig, backend: Backend, prompts: PromptLibrary | None = None) -> RunTranscript:
    return Pipeline(backend, config, prompts).run(task)


def make_config(base: PipelineConfig, perspectives: Sequence[PerspectiveId], method: Method | None = None) -> PipelineConfig:
    """Config sharing ``base``'s backend and sampling but with other perspectives."""
    if method is None:
        method = {0: Method.COT, 1: Method.MCOT}.get(len(perspectives), Method.PRCOT)
    return base.with_perspectives(method, perspectives)
