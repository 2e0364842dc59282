from __future__ import annotations

import pytest

from helpers import general_backend, general_tasks
from prcot.backend import MockBackend
from prcot.core import PipelineConfig, TaskInstance, Usage
from prcot.efficiency import UsageLedger, compare_methods, render_comparison, summarize
from prcot.errors import EmptySummaryError, PRCoTError
from prcot.pipeline import Pipeline
from prcot.prompts import PromptLibrary, render_initial


def test_mean_over_tasks():
    ledger = UsageLedger()
    ledger.add("cot", "a", "initial", Usage(60, 40, 1.0))
    ledger.add("cot", "b", "initial", Usage(200, 100, 3.0))
    s = summarize(ledger.close(), "cot")
    assert s.avg_total_tokens == 200 and s.avg_latency == 2.0 and s.n_tasks == 2


def test_summaries_need_closed_ledger_and_entries():
    ledger = UsageLedger()
    ledger.add("cot", "a", "initial", Usage(1, 1))
    with pytest.raises(PRCoTError):
        summarize(ledger, "cot")
    ledger.close()
    with pytest.raises(EmptySummaryError):
        summarize(ledger, "prcot")
    with pytest.raises(PRCoTError):
        ledger.add("cot", "b", "initial", Usage())


def test_cot_calibration_fixture_reports_450():
    task = TaskInstance("c", "arithmetic", "A farmer has 17 sheep and buys 25 more. How many sheep now?")
    n_prompt = len(render_initial(PromptLibrary.load().initial, task, "FINAL ANSWER:").split())
    reply = " ".join(["step"] * (450 - n_prompt - 3)) + " FINAL ANSWER: 42"
    t = Pipeline(MockBackend(default=reply), PipelineConfig.cot()).run(task)
    assert summarize(UsageLedger.from_transcripts([t]), "cot").avg_total_tokens == 450


def test_compare_methods_ratio():
    ledger = UsageLedger()
    ledger.add("cot", "a", "initial", Usage(300, 150))
    ledger.add("prcot", "a", "initial", Usage(1000, 1100))
    rows = compare_methods(ledger.close())
    assert [r.summary.method for r in rows] == ["cot", "prcot"]
    assert rows[0].token_ratio == 1.0
    assert rows[1].token_ratio == pytest.approx(2100 / 450)
    assert round(rows[1].token_ratio, 2) == 4.67
    assert "prcot" in render_comparison(rows)


def test_compare_single_method_is_an_error():
    ledger = UsageLedger()
    ledger.add("cot", "a", "initial", Usage(1, 1))
    with pytest.raises(EmptySummaryError):
        compare_methods(ledger.close())


def test_equal_ledgers_give_identical_rows():
    ledger = UsageLedger()
    for m in ("x", "y"):
        ledger.add(m, "a", "initial", Usage(10, 5, 0.5))
        ledger.add(m, "b", "initial", Usage(20, 5, 1.5))
    a, b = compare_methods(ledger.close(), baseline="x")
    assert (a.summary.avg_total_tokens, a.summary.avg_latency) == (b.summary.avg_total_tokens, b.summary.avg_latency)


def test_judge_exclusion_never_increases_average():
    ledger = UsageLedger()
    ledger.add("prcot", "a", "initial", Usage(10, 10, 1.0))
    ledger.add("prcot", "a", "judge", Usage(50, 5, 1.0))
    ledger.close()
    without, with_ = summarize(ledger, "prcot"), summarize(ledger, "prcot", include_judge=True)
    assert without.avg_total_tokens == 20 and with_.avg_total_tokens == 75
    assert without.avg_total_tokens <= with_.avg_total_tokens


def test_ordering_and_conservation_on_fixture():
    tasks = general_tasks(10)
    ledger = UsageLedger()
    all_ts = []
    for cfg in (PipelineConfig.cot(), PipelineConfig.mcot(), PipelineConfig.prcot()):
        ts = Pipeline(general_backend(), cfg).run_many(tasks)
        all_ts += ts
        for t in ts:
            ledger.add_transcript(t)
    ledger.close()
    # Oracle: direct summation over the transcripts.
    direct = {}
    for t in all_ts:
        direct.setdefault(t.label, []).append(sum(c.usage.total_tokens for c in t.calls))
    avgs = {m: sum(v) / len(v) for m, v in direct.items()}
    s = {m: summarize(ledger, m) for m in ("cot", "mcot", "prcot")}
    assert {m: s[m].avg_total_tokens for m in s} == avgs
    assert avgs["cot"] < avgs["mcot"] < avgs["prcot"]
    assert s["cot"].avg_calls < s["mcot"].avg_calls < s["prcot"].avg_calls
    total = sum((u for t in all_ts for u in t.per_call_usage), Usage())
    assert ledger.total() == total
