from __future__ import annotations

import json

import pytest
from hypothesis import given
from hypothesis import strategies as st

from prcot.core import (
    ALL_BUILTIN,
    V1,
    V2,
    V3,
    V4,
    CallRecord,
    GoldLabel,
    MatchMode,
    Method,
    PerspectiveId,
    PipelineConfig,
    ReasoningArtifact,
    ReflectionCritique,
    RunTranscript,
    SamplingParams,
    Stage,
    StageFailure,
    TaskInstance,
    Usage,
    canonical_perspective_order,
    config_fingerprint,
    dumps_record,
)
from prcot.errors import ValidationError


@pytest.mark.parametrize(
    "given_ids, expected",
    [
        ([V3, V1], [V1, V3]),
        ([V4, V2, V1, V3], [V1, V2, V3, V4]),
        (
            [PerspectiveId.custom("zeta"), PerspectiveId.custom("alpha"), V2],
            [V2, PerspectiveId.custom("alpha"), PerspectiveId.custom("zeta")],
        ),
    ],
)
def test_canonical_order_examples(given_ids, expected):
    assert canonical_perspective_order(given_ids) == expected


def test_canonical_order_rejects_duplicates():
    with pytest.raises(ValidationError, match="duplicate"):
        canonical_perspective_order([V1, V2, V1])


custom_names = st.from_regex(r"[a-z][a-z0-9_]{0,7}", fullmatch=True)
perspective_sets = st.builds(
    lambda b, c: list(b) + [PerspectiveId.custom(n) for n in c],
    st.sets(st.sampled_from(ALL_BUILTIN)),
    st.sets(custom_names, max_size=4),
)


@given(perspective_sets, st.randoms())
def test_canonical_order_is_idempotent_permutation(ids, rnd):
    shuffled = list(ids)
    rnd.shuffle(shuffled)
    out = canonical_perspective_order(shuffled)
    assert sorted(out, key=str) == sorted(ids, key=str)
    assert canonical_perspective_order(out) == out
    assert canonical_perspective_order(ids) == out


def test_perspective_tags():
    assert V3.label == "Bias and Ethical Consideration"
    assert PerspectiveId.custom("math").name == "math"
    with pytest.raises(ValidationError):
        PerspectiveId("v5")
    with pytest.raises(ValidationError):
        PerspectiveId("custom:")


def test_task_instance_invariants():
    with pytest.raises(ValidationError):
        TaskInstance("a", "arithmetic", "   ")
    with pytest.raises(ValueError):
        TaskInstance("a", "poetry", "q")
    t = TaskInstance("a", "ethics", "Should we?", GoldLabel("yes"))
    assert TaskInstance.from_dict(t.to_dict()) == t


def test_gold_numeric_requires_decimal():
    with pytest.raises(ValidationError):
        GoldLabel("forty-two", match_mode=MatchMode.NUMERIC)
    assert GoldLabel("42", match_mode="numeric").match_mode is MatchMode.NUMERIC
    with pytest.raises(ValidationError):
        GoldLabel("")


def test_pipeline_config_method_cardinality():
    assert PipelineConfig.cot().active_perspectives == ()
    assert PipelineConfig.mcot().active_perspectives == (V1,)
    assert PipelineConfig.prcot([V4, V1]).active_perspectives == (V1, V4)
    with pytest.raises(ValidationError):
        PipelineConfig(method=Method.COT, active_perspectives=(V1,))
    with pytest.raises(ValidationError):
        PipelineConfig(method=Method.MCOT, active_perspectives=(V1, V2))
    with pytest.raises(ValidationError):
        PipelineConfig(method=Method.MCOT, active_perspectives=())
    with pytest.raises(ValidationError):
        SamplingParams(temperature=-0.1)
    with pytest.raises(ValidationError):
        PipelineConfig(synthesis_rounds=2)
    # Degenerate prcot is allowed and reduces to cot.
    assert PipelineConfig.prcot([]).active_perspectives == ()


def test_fingerprint_tracks_prompt_text_not_method_label():
    texts = {"initial": "Solve {query}"}
    a = config_fingerprint(PipelineConfig.cot(), texts)
    b = config_fingerprint(PipelineConfig.prcot([]), texts)
    assert a == b
    assert a != config_fingerprint(PipelineConfig.cot(), {"initial": "Solve: {query}"})
    assert a != config_fingerprint(PipelineConfig.cot(sampling=SamplingParams(temperature=0.5)), texts)


def test_artifact_from_text_extracts_answer():
    art = ReasoningArtifact.from_text("2+2 means adding. FINAL ANSWER: 4")
    assert art.answer == "4" and art.stage is Stage.INITIAL
    with pytest.raises(ValidationError):
        ReasoningArtifact("x", "1", Stage.INITIAL, answer_fallback=True)


def test_usage_is_nonnegative():
    with pytest.raises(ValidationError):
        Usage(-1, 0, 0.0)
    assert (Usage(1, 2, 0.5) + Usage(3, 4, 0.25)) == Usage(4, 6, 0.75)


# --------------------------------------------------------------------------
# Transcript round-trip
# --------------------------------------------------------------------------

texts = st.text(max_size=40)
usages = st.builds(
    Usage,
    st.integers(0, 10_000),
    st.integers(0, 10_000),
    st.floats(0, 100, allow_nan=False, allow_infinity=False),
)
artifacts = st.builds(
    ReasoningArtifact,
    texts,
    st.none() | texts,
    st.just(Stage.INITIAL),
)
refined = st.builds(
    ReasoningArtifact, texts, st.none() | texts, st.just(Stage.REFINED), st.booleans()
)
calls = st.builds(
    CallRecord,
    st.sampled_from(["initial", "reflection:v1", "synthesis"]),
    texts,
    texts,
    usages,
    st.sampled_from(["mock", "replay", "remote"]),
    st.booleans(),
)


@st.composite
def transcripts(draw):
    persp = draw(st.lists(st.sampled_from(ALL_BUILTIN), unique=True))
    persp = canonical_perspective_order(persp)
    return RunTranscript(
        task_id=draw(st.text(min_size=1, max_size=10)),
        method=draw(st.sampled_from(list(Method))),
        label=draw(texts),
        fingerprint=draw(st.text("0123456789abcdef", min_size=64, max_size=64)),
        active_perspectives=tuple(persp),
        initial=draw(st.none() | artifacts),
        critiques=tuple(ReflectionCritique(p, draw(texts), draw(usages)) for p in persp),
        final=draw(st.none() | refined),
        calls=tuple(draw(st.lists(calls, max_size=6))),
        failure=draw(st.none() | st.builds(StageFailure, texts, texts, texts)),
        wall_time=draw(st.floats(0, 1e4, allow_nan=False)),
        created_at=draw(texts),
    )


@given(transcripts())
def test_transcript_round_trips_through_json(t):
    line = dumps_record(t.to_dict())
    assert RunTranscript.from_dict(json.loads(line)) == t


def test_record_dict_excludes_meta():
    t = RunTranscript("a", Method.COT, "cot", "f" * 64, (), None, (), None, (), None, 1.5, "2026-01-01")
    assert "meta" not in t.record_dict()
    assert t.to_dict()["meta"] == {"wall_time": 1.5, "created_at": "2026-01-01"}
