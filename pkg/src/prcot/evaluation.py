"""Scoring, judge-based consistency, and the ablation / perspective-count sweeps."""

from __future__ import annotations

import json
import logging
import re
import string
from collections.abc import Callable, Iterable, Mapping, Sequence
from dataclasses import asdict, dataclass, field, replace
from decimal import Decimal
from enum import Enum
from pathlib import Path
from typing import Any

from . import reference
from .backend import Backend, ChatMessage, CompletionRequest, purpose_tag
from .core import (
    TASK_KIND_ORDER,
    V1,
    V2,
    V3,
    V4,
    GoldLabel,
    MatchMode,
    Method,
    PerspectiveId,
    PipelineConfig,
    RunTranscript,
    SamplingParams,
    TaskInstance,
    Usage,
    canonical_perspective_order,
    parse_decimal,
)
from .efficiency import MethodSummary, UsageLedger, summarize
from .errors import BackendError, JudgeParseError, RenderError, ScoringError, ValidationError
from .pipeline import Pipeline, make_config
from .prompts import PromptLibrary, render_judge

log = logging.getLogger(__name__)

NUMERIC_TOLERANCE = Decimal("1e-9")
INCREMENTAL_ORDER: tuple[PerspectiveId, ...] = (V1, V2, V4, V3)


# --------------------------------------------------------------------------
# Datasets
# --------------------------------------------------------------------------


def parse_task(data: Any, where: str) -> TaskInstance:
    if not isinstance(data, dict):
        raise ValidationError(f"{where}: record must be a JSON object")
    for name in ("id", "kind", "query"):
        if name not in data:
            raise ValidationError(f"{where}: missing field '{name}'")
        if not isinstance(data[name], str):
            raise ValidationError(f"{where}: field '{name}' must be a string")
    if not data["id"]:
        raise ValidationError(f"{where}: field 'id' must be nonempty")
    gold = data.get("gold")
    if gold is not None:
        if not isinstance(gold, dict) or "canonical_answer" not in gold:
            raise ValidationError(f"{where}: field 'gold.canonical_answer' is required")
        try:
            gold = GoldLabel.from_dict(gold)
        except ValueError as exc:
            raise ValidationError(f"{where}: field 'gold': {exc}") from None
    try:
        return TaskInstance(data["id"], data["kind"], data["query"], gold)
    except ValueError as exc:
        field_name = "kind" if "TaskKind" in str(exc) else "query"
        raise ValidationError(f"{where}: field '{field_name}': {exc}") from None


def load_dataset(path: str | Path) -> list[TaskInstance]:
    """Read a JSONL dataset, validating every record and id uniqueness."""
    tasks: list[TaskInstance] = []
    seen: dict[str, int] = {}
    with Path(path).open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            where = f"{path}:{lineno}"
            try:
                data = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ValidationError(f"{where}: invalid JSON ({exc.msg})") from None
            task = parse_task(data, where)
            if task.id in seen:
                raise ValidationError(
                    f"{where}: field 'id': duplicate id {task.id!r} (first on line {seen[task.id]})"
                )
            seen[task.id] = lineno
            tasks.append(task)
    if not tasks:
        raise ValidationError(f"{path}: dataset is empty")
    return tasks


# --------------------------------------------------------------------------
# Answer matching
# --------------------------------------------------------------------------

_TRAILING_PUNCT = string.punctuation


def normalize_answer(text: str) -> str:
    text = " ".join(text.casefold().split())
    return text.rstrip(_TRAILING_PUNCT).rstrip()


def match_answer(extracted: str | None, gold: GoldLabel) -> bool:
    """Compare an extracted answer with a gold label under its match mode.

    An absent answer never matches. In numeric mode an unparseable answer is
    simply wrong.
    """
    if extracted is None:
        return False
    accepted = (gold.canonical_answer, *gold.acceptable_aliases)
    if gold.match_mode is MatchMode.EXACT:
        return extracted in accepted
    if gold.match_mode is MatchMode.NORMALIZED:
        got = normalize_answer(extracted)
        return any(got == normalize_answer(a) for a in accepted)
    value = parse_decimal(extracted)
    if value is None:
        return False
    for a in accepted:
        target = parse_decimal(a)
        if target is not None and abs(value - target) <= NUMERIC_TOLERANCE:
            return True
    return False


# --------------------------------------------------------------------------
# Error taxonomy
# --------------------------------------------------------------------------


class ErrorTag(str, Enum):
    LOGICAL_LEAP = "logical_leap"
    INCOMPLETE_INFO = "incomplete_info"
    IMPLICIT_BIAS = "implicit_bias"
    NARROW_SCOPE = "narrow_scope"
    FACTUAL_INACCURACY = "factual_inaccuracy"
    CONTRADICTORY_STEPS = "contradictory_steps"
    AMBIGUITY_MISINTERPRETATION = "ambiguity_misinterpretation"
    PREMATURE_CONCLUSION = "premature_conclusion"


_CORRECTION_MAP: dict[ErrorTag, frozenset[PerspectiveId]] = {
    ErrorTag.LOGICAL_LEAP: frozenset({V1}),
    ErrorTag.INCOMPLETE_INFO: frozenset({V2}),
    ErrorTag.IMPLICIT_BIAS: frozenset({V3}),
    ErrorTag.NARROW_SCOPE: frozenset({V4}),
    ErrorTag.FACTUAL_INACCURACY: frozenset({V2}),
    ErrorTag.CONTRADICTORY_STEPS: frozenset({V1}),
    ErrorTag.AMBIGUITY_MISINTERPRETATION: frozenset({V2}),
    ErrorTag.PREMATURE_CONCLUSION: frozenset({V1}),
}


def expected_correction_map(tag: ErrorTag | str) -> frozenset[PerspectiveId]:
    """Perspectives expected to catch an initial-reasoning error of kind ``tag``."""
    return _CORRECTION_MAP[ErrorTag(tag)]


def covered_tags(active: Iterable[PerspectiveId]) -> set[ErrorTag]:
    """Error kinds whose corrective perspective is among ``active``."""
    active = set(active)
    return {tag for tag, ps in _CORRECTION_MAP.items() if ps & active}


# --------------------------------------------------------------------------
# Scoring
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class ScoredItem:
    task_id: str
    kind: str
    initial_correct: bool
    final_correct: bool

    @property
    def corrected(self) -> bool:
        return not self.initial_correct and self.final_correct

    @property
    def regressed(self) -> bool:
        return self.initial_correct and not self.final_correct


def score_transcript(t: RunTranscript, task: TaskInstance) -> ScoredItem:
    if task.gold is None:
        raise ScoringError(f"task {task.id!r} has no gold label")
    if t.task_id != task.id:
        raise ScoringError(f"transcript {t.task_id!r} scored against task {task.id!r}")
    initial = t.initial.answer if t.initial else None
    final = t.final.answer if t.final else None
    return ScoredItem(
        t.task_id, task.kind.value, match_answer(initial, task.gold), match_answer(final, task.gold)
    )


@dataclass(frozen=True)
class EcrResult:
    value: float | None
    n_total: int
    n_initial_wrong: int
    n_corrected: int
    n_regressed: int
    n_initial_correct: int
    n_final_correct: int

    @property
    def defined(self) -> bool:
        return self.value is not None


def compute_ecr(items: Iterable[ScoredItem]) -> EcrResult:
    """Corrected / initially-wrong. ``value`` is None when nothing started wrong."""
    items = list(items)
    n_initial_wrong = sum(1 for i in items if not i.initial_correct)
    n_corrected = sum(1 for i in items if i.corrected)
    return EcrResult(
        value=n_corrected / n_initial_wrong if n_initial_wrong else None,
        n_total=len(items),
        n_initial_wrong=n_initial_wrong,
        n_corrected=n_corrected,
        n_regressed=sum(1 for i in items if i.regressed),
        n_initial_correct=len(items) - n_initial_wrong,
        n_final_correct=sum(1 for i in items if i.final_correct),
    )


# --------------------------------------------------------------------------
# Judge
# --------------------------------------------------------------------------

_VERDICT = re.compile(r"VERDICT:\s*(INCONSISTENT|CONSISTENT)\b")

REASK = (
    "Your previous reply could not be parsed. Reply again, starting with exactly "
    "one line: either 'VERDICT: CONSISTENT' or 'VERDICT: INCONSISTENT', followed by a short rationale."
)


def parse_verdict(text: str) -> bool | None:
    """True / False for a consistent / inconsistent verdict; None if unparseable.

    Surrounding noise is tolerated. Conflicting verdict tokens are unparseable.
    """
    found = {m.group(1) for m in _VERDICT.finditer(text)}
    if len(found) != 1:
        return None
    return found.pop() == "CONSISTENT"


@dataclass(frozen=True)
class JudgeVerdict:
    consistent: bool
    rationale: str
    usage: Usage
    attempts: int = 1


@dataclass
class Judge:
    """Renders the judge prompt over a final chain of thought and parses the verdict."""

    backend: Backend
    model: str
    prompts: PromptLibrary = field(default_factory=PromptLibrary.load)
    sampling: SamplingParams = field(default_factory=SamplingParams)

    def judge_text(self, cot_text: str, task: TaskInstance | None = None) -> JudgeVerdict:
        prompt = render_judge(self.prompts.judge, task, cot_text)
        messages = [ChatMessage("user", prompt)]
        usage = Usage()
        for attempt in (1, 2):
            req = CompletionRequest(self.model, tuple(messages), self.sampling, purpose_tag("judge"))
            res = self.backend.complete(req)
            usage = usage + res.usage
            verdict = parse_verdict(res.text)
            if verdict is not None:
                return JudgeVerdict(verdict, res.text.strip(), usage, attempt)
            messages += [ChatMessage("assistant", res.text), ChatMessage("user", REASK)]
        raise JudgeParseError(f"no parseable verdict after re-ask: {res.text[:80]!r}")

    def __call__(self, t: RunTranscript, task: TaskInstance | None = None) -> JudgeVerdict:
        if t.final is None:
            raise JudgeParseError(f"transcript {t.task_id!r} has no final reasoning to judge")
        return self.judge_text(t.final.cot_text, task)


def judge_consistency(t: RunTranscript, judge: Judge, task: TaskInstance | None = None) -> JudgeVerdict:
    return judge(t, task)


# --------------------------------------------------------------------------
# Metrics
# --------------------------------------------------------------------------

ALL_KINDS = "all"


@dataclass(frozen=True)
class MetricsRow:
    label: str
    method: str
    kind: str
    n_total: int
    n_initial_wrong: int
    n_corrected: int
    n_regressed: int
    n_initial_correct: int
    n_final_correct: int
    accuracy: float | None
    initial_accuracy: float | None
    error_correction_rate: float | None
    n_judged: int = 0
    n_judged_consistent: int = 0
    logical_consistency: float | None = None
    n_failed: int = 0
    n_judge_errors: int = 0
    n_scoring_errors: int = 0

    def __post_init__(self) -> None:
        if not (self.n_corrected <= self.n_initial_wrong <= self.n_total):
            raise ValidationError(f"inconsistent counts in metrics row {self.label}/{self.kind}")

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)


@dataclass(frozen=True)
class _Judged:
    verdicts: Mapping[str, JudgeVerdict]
    errors: frozenset[str]


def _row(
    label: str,
    method: str,
    kind: str,
    items: Sequence[ScoredItem],
    judged: _Judged | None,
    task_ids: set[str],
    n_failed: int,
    n_scoring_errors: int,
) -> MetricsRow:
    ecr = compute_ecr(items)
    n = ecr.n_total
    n_judged = n_consistent = n_judge_errors = 0
    if judged is not None:
        vs = [v for tid, v in judged.verdicts.items() if tid in task_ids]
        n_judged = len(vs)
        n_consistent = sum(v.consistent for v in vs)
        n_judge_errors = len(judged.errors & task_ids)
    return MetricsRow(
        label=label,
        method=method,
        kind=kind,
        n_total=n,
        n_initial_wrong=ecr.n_initial_wrong,
        n_corrected=ecr.n_corrected,
        n_regressed=ecr.n_regressed,
        n_initial_correct=ecr.n_initial_correct,
        n_final_correct=ecr.n_final_correct,
        accuracy=ecr.n_final_correct / n if n else None,
        initial_accuracy=ecr.n_initial_correct / n if n else None,
        error_correction_rate=ecr.value,
        n_judged=n_judged,
        n_judged_consistent=n_consistent,
        logical_consistency=n_consistent / n_judged if n_judged else None,
        n_failed=n_failed,
        n_judge_errors=n_judge_errors,
        n_scoring_errors=n_scoring_errors,
    )


@dataclass(frozen=True)
class GroupMetrics:
    overall: MetricsRow
    by_kind: tuple[MetricsRow, ...]
    verdicts: Mapping[str, JudgeVerdict]


def score_group(
    transcripts: Sequence[RunTranscript],
    tasks: Mapping[str, TaskInstance],
    judge: Judge | None = None,
    label: str | None = None,
    ledger: UsageLedger | None = None,
) -> GroupMetrics:
    """Metrics for transcripts of one configuration, overall and per task kind.

    Failed runs are counted in ``n_failed`` and excluded from scoring. Judge
    usage, when a ledger is given, is appended with purpose ``judge``.
    """
    if not transcripts:
        raise ValidationError("no transcripts to score")
    label = label or transcripts[0].label
    method = transcripts[0].method.value
    unknown = sorted(t.task_id for t in transcripts if t.task_id not in tasks)
    if unknown:
        raise ScoringError(f"transcript ids not in dataset: {', '.join(unknown)}")

    items: list[ScoredItem] = []
    failed: list[str] = []
    scoring_errors: list[str] = []
    for t in transcripts:
        if not t.ok:
            failed.append(t.task_id)
            continue
        try:
            items.append(score_transcript(t, tasks[t.task_id]))
        except ScoringError as exc:
            log.warning("%s", exc)
            scoring_errors.append(t.task_id)

    judged = None
    verdicts: dict[str, JudgeVerdict] = {}
    if judge is not None:
        errors: set[str] = set()
        for t in transcripts:
            if not t.ok:
                continue
            try:
                v = judge(t, tasks[t.task_id])
            except (JudgeParseError, BackendError, RenderError) as exc:
                log.warning("judge failed on %s: %s", t.task_id, exc)
                errors.add(t.task_id)
                continue
            verdicts[t.task_id] = v
            if ledger is not None:
                ledger.add(label, t.task_id, "judge", v.usage)
        judged = _Judged(verdicts, frozenset(errors))

    def ids_of(kind: str | None) -> set[str]:
        return {t.task_id for t in transcripts if kind is None or tasks[t.task_id].kind.value == kind}

    def count(ids: list[str], kind: str | None) -> int:
        return sum(1 for i in ids if kind is None or tasks[i].kind.value == kind)

    overall = _row(label, method, ALL_KINDS, items, judged, ids_of(None), len(failed), len(scoring_errors))
    by_kind = []
    present = {tasks[t.task_id].kind for t in transcripts}
    for k in TASK_KIND_ORDER:
        if k not in present:
            continue
        sub = [i for i in items if i.kind == k.value]
        by_kind.append(
            _row(label, method, k.value, sub, judged, ids_of(k.value), count(failed, k.value), count(scoring_errors, k.value))
        )
    return GroupMetrics(overall, tuple(by_kind), verdicts)


# --------------------------------------------------------------------------
# Multi-configuration experiments
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class AblationSpec:
    """Either drop one perspective from ``base`` or keep a prefix of the fixed order."""

    base: tuple[PerspectiveId, ...] = (V1, V2, V3, V4)
    drop: PerspectiveId | None = None
    prefix_n: int | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "base", tuple(canonical_perspective_order(self.base)))
        if (self.drop is None) == (self.prefix_n is None):
            raise ValidationError("exactly one of drop / prefix_n must be set")
        if self.drop is not None and self.drop not in self.base:
            raise ValidationError(f"cannot drop {self.drop}: not in base set")
        if self.prefix_n is not None and not 0 <= self.prefix_n <= len(INCREMENTAL_ORDER):
            raise ValidationError(f"prefix_n must be in [0, {len(INCREMENTAL_ORDER)}]")

    def active(self) -> list[PerspectiveId]:
        if self.drop is not None:
            return [p for p in self.base if p != self.drop]
        return canonical_perspective_order(INCREMENTAL_ORDER[: self.prefix_n])

    def method(self) -> Method:
        if self.prefix_n == 0:
            return Method.COT
        if self.prefix_n == 1:
            return Method.MCOT
        return Method.PRCOT


@dataclass(frozen=True)
class ConfigResult:
    label: str
    config: PipelineConfig
    transcripts: tuple[RunTranscript, ...]
    metrics: GroupMetrics
    efficiency: MethodSummary
    spec: AblationSpec | None = None
    reference: Mapping[str, float] | None = None

    @property
    def n_failed(self) -> int:
        return self.metrics.overall.n_failed

    def to_dict(self) -> dict[str, Any]:
        return {
            "label": self.label,
            "method": self.config.method.value,
            "active_perspectives": [p.tag for p in self.config.active_perspectives],
            "overall": self.metrics.overall.to_dict(),
            "by_kind": [r.to_dict() for r in self.metrics.by_kind],
            "efficiency": asdict(self.efficiency),
            "reference": dict(self.reference) if self.reference else None,
        }


def _label_full(base: Sequence[PerspectiveId]) -> str:
    return f"PR-CoT Full ({', '.join(p.tag for p in base)})"


def _execute(
    label: str,
    config: PipelineConfig,
    tasks: Sequence[TaskInstance],
    backend: Backend,
    prompts: PromptLibrary,
    judge: Judge | None,
    parallel: int,
    progress: Callable[[str], None] | None,
    spec: AblationSpec | None = None,
    ref: Mapping[str, float] | None = None,
) -> ConfigResult:
    if progress:
        progress(f"running {label} ({len(tasks)} tasks)")
    transcripts = Pipeline(backend, config, prompts, label=label).run_many(tasks, parallel)
    ledger = UsageLedger()
    for t in transcripts:
        ledger.add_transcript(t)
    by_id = {t.id: t for t in tasks}
    metrics = score_group(transcripts, by_id, judge, label, ledger)
    ledger.close()
    if progress:
        o = metrics.overall
        progress(f"done {label}: ecr={_pct(o.error_correction_rate)} acc={_pct(o.accuracy)} failed={o.n_failed}")
    return ConfigResult(label, config, tuple(transcripts), metrics, summarize(ledger, label), spec, ref)


def run_ablation(
    tasks: Sequence[TaskInstance],
    base_config: PipelineConfig,
    backend: Backend,
    prompts: PromptLibrary | None = None,
    *,
    judge: Judge | None = None,
    mcot_perspective: PerspectiveId = V1,
    parallel: int = 1,
    progress: Callable[[str], None] | None = None,
) -> list[ConfigResult]:
    """Baselines, the full set, then each leave-one-out variant."""
    if not tasks:
        raise ValidationError("ablation needs a nonempty dataset")
    base = canonical_perspective_order(base_config.active_perspectives)
    if not base:
        raise ValidationError("ablation needs a nonempty base perspective set")
    prompts = prompts if prompts is not None else PromptLibrary.load()
    plan: list[tuple[str, PipelineConfig, AblationSpec | None]] = [
        ("CoT Baseline", make_config(base_config, [], Method.COT), None),
        ("MCoT (Single Reflection)", make_config(base_config, [mcot_perspective], Method.MCOT), None),
        (_label_full(base), make_config(base_config, base, Method.PRCOT), None),
    ]
    for p in base:
        spec = AblationSpec(base=tuple(base), drop=p)
        plan.append((f"PR-CoT w/o {p.tag}", make_config(base_config, spec.active(), Method.PRCOT), spec))
    return [
        _execute(label, cfg, tasks, backend, prompts, judge, parallel, progress, spec, reference.ABLATION.get(label))
        for label, cfg, spec in plan
    ]


INCREMENTAL_LABELS = {0: "N=0 (CoT Baseline)", 1: "N=1 (MCoT-like)", 4: "N=4 (Full PR-CoT)"}


def run_incremental(
    tasks: Sequence[TaskInstance],
    base_config: PipelineConfig,
    backend: Backend,
    prompts: PromptLibrary | None = None,
    *,
    judge: Judge | None = None,
    parallel: int = 1,
    progress: Callable[[str], None] | None = None,
) -> list[ConfigResult]:
    """Prefixes 0..4 of the addition order v1, v2, v4, v3."""
    if not tasks:
        raise ValidationError("incremental sweep needs a nonempty dataset")
    prompts = prompts if prompts is not None else PromptLibrary.load()
    out = []
    for n in range(len(INCREMENTAL_ORDER) + 1):
        spec = AblationSpec(prefix_n=n)
        cfg = make_config(base_config, spec.active(), spec.method())
        label = INCREMENTAL_LABELS.get(n, f"N={n}")
        out.append(
            _execute(label, cfg, tasks, backend, prompts, judge, parallel, progress, spec, reference.INCREMENTAL.get(n))
        )
    return out


# --------------------------------------------------------------------------
# Rendering
# --------------------------------------------------------------------------


def _pct(x: float | None) -> str:
    return "n/a" if x is None else f"{100 * x:.1f}%"


def _pp(a: float | None, b: float | None) -> str:
    if a is None or b is None:
        return "n/a"
    return f"{100 * (a - b):+.1f}"


def render_multitask(rows: Iterable[MetricsRow]) -> str:
    """Per-kind comparison of cot / mcot / prcot in the published column layout."""
    by: dict[tuple[str, str], MetricsRow] = {}
    for r in rows:
        if r.kind != ALL_KINDS:
            by.setdefault((r.kind, r.method), r)
    header = (
        f"{'Task':<16}{'CoT LC':>9}{'MCoT LC':>9}{'PR-CoT LC':>11}{'MCoT Impr.':>12}{'PR-CoT Impr.':>14}"
        f"{'MCoT ECR':>10}{'PR-CoT ECR':>12}{'CoT Acc':>9}{'MCoT Acc':>10}{'PR-CoT Acc':>12}"
    )
    lines = [header]
    for k in TASK_KIND_ORDER:
        cot, mcot, pr = (by.get((k.value, m)) for m in ("cot", "mcot", "prcot"))
        if not (cot or mcot or pr):
            continue

        def g(r: MetricsRow | None, attr: str) -> float | None:
            return getattr(r, attr) if r is not None else None

        lines.append(
            f"{k.value:<16}{_pct(g(cot, 'logical_consistency')):>9}{_pct(g(mcot, 'logical_consistency')):>9}"
            f"{_pct(g(pr, 'logical_consistency')):>11}"
            f"{_pp(g(mcot, 'logical_consistency'), g(cot, 'logical_consistency')):>12}"
            f"{_pp(g(pr, 'logical_consistency'), g(cot, 'logical_consistency')):>14}"
            f"{_pct(g(mcot, 'error_correction_rate')):>10}{_pct(g(pr, 'error_correction_rate')):>12}"
            f"{_pct(g(cot, 'accuracy')):>9}{_pct(g(mcot, 'accuracy')):>10}{_pct(g(pr, 'accuracy')):>12}"
        )
        ref = reference.MULTI_TASK.get(k)
        if ref:
            lines.append(
                f"{'  (reference)':<16}{_pct(ref['cot']['lc']):>9}{_pct(ref['mcot']['lc']):>9}{_pct(ref['prcot']['lc']):>11}"
                f"{_pp(ref['mcot']['lc'], ref['cot']['lc']):>12}{_pp(ref['prcot']['lc'], ref['cot']['lc']):>14}"
                f"{_pct(ref['mcot']['ecr']):>10}{_pct(ref['prcot']['ecr']):>12}"
            )
    return "\n".join(lines)


def render_experiment(results: Sequence[ConfigResult]) -> str:
    lines = [
        f"{'Configuration':<32}{'LC':>8}{'ECR':>8}{'Acc':>8}{'Fixed':>7}{'Regr.':>7}{'Fail':>6}"
        f"{'Tokens':>9}{'Ref LC':>8}{'Ref ECR':>9}"
    ]
    for r in results:
        o = r.metrics.overall
        ref = r.reference or {}
        lines.append(
            f"{r.label:<32}{_pct(o.logical_consistency):>8}{_pct(o.error_correction_rate):>8}{_pct(o.accuracy):>8}"
            f"{o.n_corrected:>7}{o.n_regressed:>7}{o.n_failed:>6}{r.efficiency.avg_total_tokens:>9.1f}"
            f"{_pct(ref.get('lc')):>8}{_pct(ref.get('ecr')):>9}"
        )
    return "\n".join(lines)


def groups_by_label(transcripts: Iterable[RunTranscript]) -> dict[str, list[RunTranscript]]:
    out: dict[str, list[RunTranscript]] = {}
    for t in transcripts:
        out.setdefault(t.label, []).append(t)
    return out


def with_label(row: MetricsRow, label: str) -> MetricsRow:
    return replace(row, label=label)
