from __future__ import annotations

import pytest

from prcot.core import ALL_BUILTIN, V1, V3, PerspectiveId, PipelineConfig, ReasoningArtifact, ReflectionCritique, TaskInstance, Usage
from prcot.errors import ContractError, RenderError, ValidationError
from prcot.prompts import PromptLibrary, PromptTemplate, render_initial, render_reflection, render_synthesis

TASK = TaskInstance("t", "ethics", "Should the committee favor applicant A?")
COT = ReasoningArtifact.from_text("A has more experience, so yes.\nFINAL ANSWER: yes")
LIB = PromptLibrary.load()


def crit(p, text="issue"):
    return ReflectionCritique(p, f"{text} from {p}", Usage())


def test_render_initial_substitution():
    t = PromptTemplate("initial", "Solve: {query}. End with {answer_marker}")
    assert render_initial(t, TaskInstance("x", "arithmetic", "2+2"), "FINAL ANSWER:") == "Solve: 2+2. End with FINAL ANSWER:"


def test_render_initial_rejects_stage_foreign_placeholder():
    with pytest.raises(RenderError):
        render_initial(PromptTemplate("i", "{query} {critiques}"), TASK, "M:")


def test_render_initial_requires_query():
    with pytest.raises(RenderError):
        render_initial(PromptTemplate("i", "Answer now. {answer_marker}"), TASK, "M:")


def test_unknown_placeholder_rejected_at_load():
    with pytest.raises(ValidationError):
        PromptTemplate("bad", "{query} {foo}")


def test_substituted_text_is_not_rescanned():
    task = TaskInstance("x", "custom", "what does {cot} mean?")
    out = render_initial(PromptTemplate("i", "Q: {query}"), task, "M:")
    assert out == "Q: what does {cot} mean?"


def test_builtin_initial_has_step_by_step_directive():
    out = render_initial(LIB.initial, TASK, "FINAL ANSWER:")
    assert "step-by-step" in out
    assert "FINAL ANSWER:" in out and TASK.query in out


@pytest.mark.parametrize("p", ALL_BUILTIN, ids=str)
def test_builtin_reflections_embed_query_and_cot(p):
    out = render_reflection(LIB.reflection_for(p), TASK, COT)
    assert TASK.query in out and COT.cot_text in out


@pytest.mark.parametrize(
    "p, phrase",
    [
        ("v1", "internal coherence, rigor, and non-contradiction"),
        ("v2", "critical information, relevant background knowledge, specific assumptions, or explicit constraints"),
        ("v3", "inappropriate biases, fairness issues, or neglected ethical dimensions"),
        ("v4", "other plausible reasoning paths, alternative methodologies"),
    ],
)
def test_builtin_reflection_directives(p, phrase):
    assert phrase in render_reflection(LIB.reflection_for(PerspectiveId(p)), TASK, COT)


def test_reflection_rejects_empty_cot():
    with pytest.raises(RenderError):
        render_reflection(LIB.reflection_for(V1), TASK, ReasoningArtifact("  ", None))


def test_synthesis_orders_and_labels_critiques():
    out = render_synthesis(LIB.synthesis, TASK, COT, [crit(V3), crit(V1)], "FINAL ANSWER:")
    assert out.index("[v1 Logical Consistency]") < out.index("[v3 Bias and Ethical Consideration]")
    assert out == render_synthesis(LIB.synthesis, TASK, COT, [crit(V1), crit(V3)], "FINAL ANSWER:")


def test_synthesis_four_blocks_and_contents():
    cs = [crit(p) for p in ALL_BUILTIN]
    out = render_synthesis(LIB.synthesis, TASK, COT, cs, "FINAL ANSWER:")
    assert sum(out.count(f"[{p.tag} ") for p in ALL_BUILTIN) == 4
    for c in cs:
        assert c.text in out
    assert TASK.query in out and COT.cot_text in out and "FINAL ANSWER:" in out
    assert "overlapping or reinforcing critiques" in out


def test_synthesis_needs_critiques():
    with pytest.raises(ContractError):
        render_synthesis(LIB.synthesis, TASK, COT, [], "FINAL ANSWER:")


def test_custom_perspective_label():
    out = render_synthesis(LIB.synthesis, TASK, COT, [crit(PerspectiveId.custom("legal")), crit(V1)], "M:")
    assert out.index("[v1 ") < out.index("[custom:legal]")


def test_rendering_is_pure():
    a = render_synthesis(LIB.synthesis, TASK, COT, [crit(V1)], "M:")
    b = render_synthesis(LIB.synthesis, TASK, COT, [crit(V1)], "M:")
    assert a == b


def test_load_from_directory_with_custom_and_manifest(tmp_path):
    d = tmp_path / "prompts"
    d.mkdir()
    for name in ("initial", "synthesis", "judge", "reflect_v1"):
        body = (LIB.reflection_for(V1) if name == "reflect_v1" else getattr(LIB, name)).body
        (d / f"{name}.txt").write_text(body + "\n")
    (d / "reflect_legal.txt").write_text("Legal review of {cot} for {query}\n")
    (d / "manifest.yaml").write_text("templates:\n  reflect_legal: 3\n")
    lib = PromptLibrary.load(d)
    legal = PerspectiveId.custom("legal")
    assert lib.reflection_for(legal).version == 3
    assert lib.reflection_for(legal).body == "Legal review of {cot} for {query}"
    with pytest.raises(ValidationError):
        lib.reflection_for(V3)
    texts = lib.texts_for(PipelineConfig.prcot([V1, legal]))
    assert set(texts) == {"initial", "reflect_v1", "reflect_legal", "synthesis"}


def test_missing_required_file(tmp_path):
    (tmp_path / "initial.txt").write_text("{query}")
    with pytest.raises(ValidationError, match="synthesis"):
        PromptLibrary.load(tmp_path)
