import json

import pytest

from cmine.mining import CulturePoint
from cmine.synthesis import (
    TASK_TYPES,
    ReplayClient,
    StubClient,
    build_prompt,
    emit_dataset,
    load_template,
    synthesize,
    validate_response,
)


def _cp(doc_id: str, rank: int, cluster_id: int = 7, lead: str = "Lead.") -> CulturePoint:
    return CulturePoint(
        id=doc_id, title=f"Title {doc_id}", leading_paragraph=lead, lang="zh",
        cluster_id=cluster_id, gamma=0.9, cluster_size=12, centrality_rank=rank,
    )


def _payload(task_type: str) -> dict:
    if task_type == "single_choice":
        return {
            "question_type": "single_choice",
            "question": "Q?",
            "options": {"A": "a", "B": "b", "C": "c", "D": "d"},
            "correct_answer": "B",
            "reason": "R.",
        }
    if task_type == "true_false":
        return {
            "question_type": "true_false",
            "statement": "S.",
            "reason": "R.",
            "correct_answer": "False",
        }
    return {
        "question_type": "short_answer",
        "question": "Q?",
        "reason": "R.",
        "correct_answer": "Because.",
    }


# ---------------------------------------------------------------- templates and prompts


def test_templates_exist_and_have_placeholder() -> None:
    for task_type in TASK_TYPES:
        template = load_template(task_type)
        assert "{{INPUT_TEXT}}" in template
        assert f'"question_type": "{task_type}"' in template


def test_load_template_unknown_type() -> None:
    with pytest.raises(ValueError):
        load_template("essay")


def test_build_prompt_joins_central_entries() -> None:
    cps = [_cp("b", 2), _cp("a", 1), _cp("c", 3)]
    task = build_prompt(cps, "short_answer", n=2)
    assert task.cluster_id == 7
    assert task.input_text == "Title a\nLead.\n\nTitle b\nLead."
    assert "{{INPUT_TEXT}}" not in task.prompt
    assert task.input_text in task.prompt
    template = load_template("short_answer")
    assert task.prompt == template.replace("{{INPUT_TEXT}}", task.input_text)


def test_build_prompt_title_only_when_no_lead() -> None:
    task = build_prompt([_cp("a", 1, lead="")], "true_false")
    assert task.input_text == "Title a"


def test_build_prompt_empty_cluster_rejected() -> None:
    with pytest.raises(ValueError):
        build_prompt([], "short_answer")


# ---------------------------------------------------------------- validation


def test_validate_accepts_conforming_payloads() -> None:
    for task_type in TASK_TYPES:
        payload, errors = validate_response(json.dumps(_payload(task_type)), task_type)
        assert errors == []
        assert payload == _payload(task_type)


def test_validate_rejects_prose_wrapper() -> None:
    raw = "Sure! Here is the question:\n" + json.dumps(_payload("true_false"))
    payload, errors = validate_response(raw, "true_false")
    assert payload is None
    assert errors == ["extra_prose"]
    _, errors = validate_response(json.dumps(_payload("short_answer")) + "\nHope that helps!", "short_answer")
    assert errors == ["extra_prose"]


def test_validate_rejects_garbage() -> None:
    assert validate_response("not json at all", "short_answer") == (None, ["non_json"])
    assert validate_response("[1, 2, 3]", "short_answer") == (None, ["non_json"])


def test_validate_missing_key_per_deletion() -> None:
    for task_type in TASK_TYPES:
        base = _payload(task_type)
        for key in base:
            mutant = {k: v for k, v in base.items() if k != key}
            payload, errors = validate_response(json.dumps(mutant), task_type)
            assert payload is None
            assert f"missing_key:{key}" in errors


def test_validate_missing_option() -> None:
    mutant = _payload("single_choice")
    mutant["options"] = {"A": "a", "B": "b", "C": "c"}
    _, errors = validate_response(json.dumps(mutant), "single_choice")
    assert "missing_key:options.D" in errors


def test_validate_illegal_answers() -> None:
    mutant = _payload("single_choice")
    mutant["correct_answer"] = "E"
    _, errors = validate_response(json.dumps(mutant), "single_choice")
    assert "illegal_answer" in errors
    tf = _payload("true_false")
    tf["correct_answer"] = "true"
    _, errors = validate_response(json.dumps(tf), "true_false")
    assert "illegal_answer" in errors


def test_validate_type_mismatch_and_empty_values() -> None:
    wrong = _payload("short_answer")
    _, errors = validate_response(json.dumps(wrong), "true_false")
    assert "question_type_mismatch" in errors or "missing_key:statement" in errors
    empty = _payload("short_answer")
    empty["question"] = ""
    _, errors = validate_response(json.dumps(empty), "short_answer")
    assert "invalid_value:question" in errors
    wrong_type = _payload("single_choice")
    wrong_type["options"] = ["a", "b", "c", "d"]
    _, errors = validate_response(json.dumps(wrong_type), "single_choice")
    assert "invalid_value:options" in errors


def test_validate_unknown_task_type() -> None:
    with pytest.raises(ValueError):
        validate_response("{}", "essay")


# ---------------------------------------------------------------- synthesis runs


def test_synthesize_one_record_per_cluster_and_type() -> None:
    cps = [_cp("a", 1, cluster_id=3), _cp("b", 2, cluster_id=3), _cp("c", 1, cluster_id=9)]
    records, rejects = synthesize(cps, StubClient())
    assert rejects == []
    assert len(records) == 2 * len(TASK_TYPES)
    assert [(r.cluster_id, r.task_type) for r in records] == [
        (c, t) for c in (3, 9) for t in TASK_TYPES
    ]
    assert all(r.provenance == {"model": "stub", "timestamp": "1970-01-01T00:00:00+00:00"} for r in records)


def test_synthesize_multiplicity() -> None:
    records, _ = synthesize([_cp("a", 1)], StubClient(), multiplicity=3)
    assert len(records) == 3 * len(TASK_TYPES)


def test_synthesize_collects_rejects() -> None:
    bad = "I'd rather chat about something else."
    script = [json.dumps(_payload(t)) for t in TASK_TYPES[:2]] + [bad]
    records, rejects = synthesize([_cp("a", 1)], ReplayClient(script))
    assert len(records) == 2
    assert len(rejects) == 1
    assert rejects[0]["task_type"] == "short_answer"
    assert rejects[0]["errors"] == ["non_json"]
    assert rejects[0]["raw"] == bad


def test_synthesize_unknown_task_type() -> None:
    with pytest.raises(ValueError):
        synthesize([_cp("a", 1)], StubClient(), task_types=("essay",))


def test_emit_dataset_stable_layout(tmp_path) -> None:
    records, _ = synthesize([_cp("a", 1)], StubClient())
    path = tmp_path / "synth.jsonl"
    emit_dataset(records, path)
    lines = path.read_text(encoding="utf-8").splitlines()
    assert len(lines) == len(TASK_TYPES)
    first = json.loads(lines[0])
    assert list(first) == ["task_type", "payload", "cluster_id", "provenance"]
    emit_dataset(records, path)
    assert path.read_text(encoding="utf-8").splitlines() == lines
