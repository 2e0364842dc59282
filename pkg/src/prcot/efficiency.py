"""Per-method token and latency accounting.

Token totals count every prompt and completion token of every non-judge call
in a task, including prompt tokens that re-feed earlier stages' outputs.
Latency per task is the sum of its call latencies, so replayed or cached runs
report the original inference time.
"""

from __future__ import annotations

import threading
from collections.abc import Iterable
from dataclasses import dataclass

from .core import RunTranscript, Usage
from .errors import EmptySummaryError, PRCoTError

JUDGE = "judge"


@dataclass(frozen=True)
class LedgerEntry:
    method: str
    task_id: str
    purpose: str
    usage: Usage


class UsageLedger:
    """Append-only list of usage entries; summaries require a closed ledger."""

    def __init__(self) -> None:
        self._entries: list[LedgerEntry] = []
        self._lock = threading.Lock()
        self.closed = False

    def add(self, method: str, task_id: str, purpose: str, usage: Usage) -> None:
        with self._lock:
            if self.closed:
                raise PRCoTError("ledger is closed")
            self._entries.append(LedgerEntry(method, task_id, purpose, usage))

    def add_transcript(self, t: RunTranscript, method: str | None = None) -> None:
        for call in t.calls:
            self.add(method or t.label, t.task_id, call.purpose, call.usage)

    def close(self) -> UsageLedger:
        self.closed = True
        return self

    @classmethod
    def from_transcripts(cls, transcripts: Iterable[RunTranscript]) -> UsageLedger:
        ledger = cls()
        for t in transcripts:
            ledger.add_transcript(t)
        return ledger.close()

    @property
    def entries(self) -> tuple[LedgerEntry, ...]:
        with self._lock:
            return tuple(self._entries)

    def methods(self) -> list[str]:
        seen: dict[str, None] = {}
        for e in self.entries:
            seen.setdefault(e.method, None)
        return list(seen)

    def total(self, include_judge: bool = True) -> Usage:
        out = Usage()
        for e in self.entries:
            if include_judge or e.purpose != JUDGE:
                out = out + e.usage
        return out


@dataclass(frozen=True)
class MethodSummary:
    method: str
    n_tasks: int
    avg_total_tokens: float
    avg_latency: float
    avg_calls: float
    judge_included: bool


def summarize(ledger: UsageLedger, method: str, include_judge: bool = False) -> MethodSummary:
    """Average per-task tokens, latency and call count for ``method``."""
    if not ledger.closed:
        raise PRCoTError("summarize needs a closed ledger")
    per_task: dict[str, list[Usage]] = {}
    for e in ledger.entries:
        if e.method != method or (e.purpose == JUDGE and not include_judge):
            continue
        per_task.setdefault(e.task_id, []).append(e.usage)
    if not per_task:
        raise EmptySummaryError(f"no ledger entries for method {method!r}")
    n = len(per_task)
    tokens = sum(u.total_tokens for us in per_task.values() for u in us)
    latency = sum(u.latency for us in per_task.values() for u in us)
    calls = sum(len(us) for us in per_task.values())
    return MethodSummary(method, n, tokens / n, latency / n, calls / n, include_judge)


@dataclass(frozen=True)
class ComparisonRow:
    summary: MethodSummary
    token_ratio: float | None
    latency_ratio: float | None


def compare_methods(
    ledger: UsageLedger, include_judge: bool = False, baseline: str = "cot"
) -> list[ComparisonRow]:
    """One row per method with ratios against ``baseline`` (None if absent)."""
    methods = ledger.methods()
    if len(methods) < 2:
        raise EmptySummaryError(f"comparison needs at least two methods, got {methods}")
    summaries = [summarize(ledger, m, include_judge) for m in methods]
    base = next((s for s in summaries if s.method == baseline), None)

    def ratio(a: float, b: float | None) -> float | None:
        if b is None or b == 0:
            return None
        return a / b

    return [
        ComparisonRow(
            s,
            ratio(s.avg_total_tokens, base.avg_total_tokens if base else None),
            ratio(s.avg_latency, base.avg_latency if base else None),
        )
        for s in summaries
    ]


def render_comparison(rows: Iterable[ComparisonRow]) -> str:
    lines = [f"{'Method':<28}{'Avg tokens':>12}{'Avg latency (s)':>17}{'Avg calls':>11}{'Tokens x':>10}"]
    for r in rows:
        s = r.summary
        ratio = f"{r.token_ratio:.2f}" if r.token_ratio is not None else "-"
        lines.append(
            f"{s.method:<28}{s.avg_total_tokens:>12.1f}{s.avg_latency:>17.3f}{s.avg_calls:>11.2f}{ratio:>10}"
        )
    return "\n".join(lines)
