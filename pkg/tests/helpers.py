"""Scripted fixtures shared by the test modules."""

from __future__ import annotations

import json
from pathlib import Path

import yaml

from prcot.backend import CompletionRequest, MockBackend
from prcot.core import GoldLabel, MatchMode, TaskInstance, TaskKind
from prcot.evaluation import ErrorTag, expected_correction_map

MARKER = "FINAL ANSWER:"
KINDS = [TaskKind.ARITHMETIC, TaskKind.COMMONSENSE, TaskKind.ETHICS, TaskKind.LOGIC_PUZZLE]


# --------------------------------------------------------------------------
# General 20-task arithmetic-style fixture
# --------------------------------------------------------------------------


def general_tasks(n: int = 20) -> list[TaskInstance]:
    tasks = []
    for i in range(n):
        a, b = 3 * i + 1, 7 * i + 2
        tasks.append(
            TaskInstance(
                id=f"t{i:02d}",
                kind=KINDS[i % 4],
                query=f"TASK#{i:02d}: what is {a} + {b}?",
                gold=GoldLabel(str(a + b), (), MatchMode.NUMERIC),
            )
        )
    return tasks


def _task_no(prompt: str) -> int:
    i = prompt.index("TASK#")
    return int(prompt[i + 5 : i + 7])


def general_responder(req: CompletionRequest) -> str:
    """Initial answers are wrong for every third task; synthesis always fixes them."""
    prompt = req.prompt_text
    if req.purpose == "judge":
        # First-pass reasoning (with its "stepN" filler) is judged inconsistent.
        return "VERDICT: INCONSISTENT gaps" if "step0" in prompt else "VERDICT: CONSISTENT the steps follow."
    i = _task_no(prompt)
    a, b = 3 * i + 1, 7 * i + 2
    right = a + b
    if req.purpose == "initial":
        got = right + 1 if i % 3 == 0 else right
        steps = " ".join(f"step{k}" for k in range(i % 5 + 3))
        return f"Adding {a} and {b}: {steps}.\n{MARKER} {got}"
    if req.purpose.startswith("reflection:"):
        return f"Critique ({req.purpose}) of task {i}: recheck the carry in the sum."
    if req.purpose == "synthesis":
        return f"Revised: {a} plus {b} equals {right}.\n{MARKER} {right}"
    raise AssertionError(req.purpose)


def general_backend(latency: float = 0.01) -> MockBackend:
    return MockBackend(responder=general_responder, latency=latency)


# --------------------------------------------------------------------------
# Flaw-injection suite: one item per error tag
# --------------------------------------------------------------------------

FLAW_TAGS = list(ErrorTag)


def flaw_tasks() -> list[TaskInstance]:
    return [
        TaskInstance(
            id=f"flaw-{tag.value}",
            kind=TaskKind.ETHICS,
            query=f"ITEM[{tag.value}] decide the case.",
            gold=GoldLabel("right", (), MatchMode.NORMALIZED),
        )
        for tag in FLAW_TAGS
    ]


def _flaw_rules() -> list[dict]:
    rules: list[dict] = []
    for tag in FLAW_TAGS:
        for p in sorted(expected_correction_map(tag), key=lambda p: p.tag):
            rules.append(
                {
                    "purpose": f"reflection:{p.tag}",
                    "contains": [f"ITEM[{tag.value}]"],
                    "reply": f"FLAW-FOUND[{tag.value}]: the reasoning has a {tag.value.replace('_', ' ')}.",
                }
            )
    for tag in FLAW_TAGS:
        rules.append(
            {
                "purpose": "synthesis",
                "contains": [f"FLAW-FOUND[{tag.value}]"],
                "reply": f"Fixed the {tag.value} flaw.\n{MARKER} right",
            }
        )
    rules += [
        {"purpose": "initial", "reply": f"First pass reasoning with an injected flaw.\n{MARKER} wrong"},
        {"purpose": "reflection:*", "reply": "No issues found from this angle."},
        {"purpose": "synthesis", "reply": f"Nothing to change.\n{MARKER} wrong"},
        {"purpose": "judge", "reply": "VERDICT: CONSISTENT"},
    ]
    return rules


def write_flaw_script(path: Path) -> Path:
    path.write_text(yaml.safe_dump({"rules": _flaw_rules()}, sort_keys=False), encoding="utf-8")
    return path


def flaw_backend(tmp_path: Path) -> MockBackend:
    return MockBackend.from_file(write_flaw_script(tmp_path / "flaw_script.yaml"))


def write_dataset(path: Path, tasks: list[TaskInstance]) -> Path:
    path.write_text("".join(json.dumps(t.to_dict()) + "\n" for t in tasks), encoding="utf-8")
    return path


def reference_extract(text: str, marker: str) -> str | None:
    """Oracle: enumerate every marker occurrence, read each to end of line, keep the last."""
    values = []
    start = 0
    while True:
        idx = text.find(marker, start)
        if idx < 0:
            break
        rest = text[idx + len(marker):]
        line = rest.partition("\n")[0]
        values.append(line.strip())
        start = idx + 1
    if not values:
        return None
    return values[-1] or None


def make_transcript(task_id: str, initial: str | None, final: str | None, label: str = "prcot"):
    """Minimal successful transcript with the given extracted answers."""
    from prcot.core import Method, ReasoningArtifact, RunTranscript, Stage

    init = ReasoningArtifact(f"reasoning {task_id}", initial, Stage.INITIAL)
    fin = ReasoningArtifact(f"refined {task_id}", final, Stage.REFINED)
    method = Method(label) if label in {m.value for m in Method} else Method.PRCOT
    return RunTranscript(task_id, method, label, "0" * 64, (), init, (), fin, ())


_ANGLES = {
    "LOGICAL CONSISTENCY": "v1",
    "INFORMATION COMPLETENESS": "v2",
    "BIAS AND ETHICAL CONSIDERATION": "v3",
    "ALTERNATIVE SOLUTIONS": "v4",
}


def classify_prompt(text: str) -> str:
    """Recover the purpose tag of a built-in template rendering."""
    if text.startswith("You are auditing"):
        return "judge"
    if "\nCritiques:\n" in text:
        return "synthesis"
    for angle, tag in _ANGLES.items():
        if f"from the angle of {angle}" in text:
            return f"reflection:{tag}"
    return "initial"


class FakeServer:
    """OpenAI-compatible chat endpoint answering from a mock backend."""

    def __init__(self, mock: MockBackend, fail_after: int | None = None) -> None:
        self.mock = mock
        self.fail_after = fail_after
        self.requests: list[dict] = []

    def __call__(self, request):
        import httpx

        from prcot.core import SamplingParams

        body = json.loads(request.content)
        if self.fail_after is not None and len(self.requests) >= self.fail_after:
            raise httpx.ConnectError("server went away", request=request)
        self.requests.append(body)
        prompt = "\n".join(m["content"] for m in body["messages"])
        req = CompletionRequest.single(body["model"], prompt, SamplingParams(), classify_prompt(body["messages"][0]["content"]))
        text = self.mock.complete(req).text
        return httpx.Response(
            200,
            json={
                "choices": [{"message": {"role": "assistant", "content": text}}],
                "usage": {"prompt_tokens": len(prompt.split()), "completion_tokens": len(text.split())},
            },
        )

    def transport(self):
        import httpx

        return httpx.MockTransport(self)


def refuse_transport():
    """Transport that fails the test if any request reaches it."""
    import httpx

    def handler(request):
        raise AssertionError(f"unexpected network call to {request.url}")

    return httpx.MockTransport(handler)
