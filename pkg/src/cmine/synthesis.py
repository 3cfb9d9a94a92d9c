"""Instruction synthesis from selected clusters.

Renders the three task-format prompts around a cluster's most central
entries, dispatches them to a pluggable text-completion client, and accepts
only responses that are a single strictly-conforming JSON object.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Iterable, Mapping, Protocol, Sequence

from .mining import CulturePoint

TASK_TYPES = ("single_choice", "true_false", "short_answer")
_PLACEHOLDER = "{{INPUT_TEXT}}"
_OPTION_KEYS = ("A", "B", "C", "D")

_REQUIRED_KEYS = {
    "single_choice": ("question_type", "question", "options", "correct_answer", "reason"),
    "true_false": ("question_type", "statement", "reason", "correct_answer"),
    "short_answer": ("question_type", "question", "reason", "correct_answer"),
}
_LEGAL_ANSWERS = {
    "single_choice": set(_OPTION_KEYS),
    "true_false": {"True", "False"},
}


@dataclass(frozen=True)
class SynthesisTask:
    cluster_id: int
    task_type: str
    input_text: str
    prompt: str


@dataclass(frozen=True)
class InstructionRecord:
    task_type: str
    payload: dict
    cluster_id: int
    provenance: dict


class LLMClient(Protocol):
    @property
    def model_id(self) -> str: ...

    def complete(self, prompt: str) -> str: ...

    def issued_at(self) -> str: ...


def load_template(task_type: str) -> str:
    if task_type not in TASK_TYPES:
        raise ValueError(f"unknown task type {task_type!r}")
    return (
        resources.files("cmine")
        .joinpath("templates", f"{task_type}.txt")
        .read_text(encoding="utf-8")
    )


def build_prompt(
    cluster_cps: Sequence[CulturePoint], task_type: str, n: int = 10
) -> SynthesisTask:
    """Render the task-type template around the cluster's n most central entries."""
    if not cluster_cps:
        raise ValueError("cannot build a prompt from an empty cluster")
    if n < 1:
        raise ValueError("n must be >= 1")
    template = load_template(task_type)
    ranked = sorted(cluster_cps, key=lambda cp: cp.centrality_rank)[:n]
    parts = [
        f"{cp.title}\n{cp.leading_paragraph}" if cp.leading_paragraph else cp.title
        for cp in ranked
    ]
    input_text = "\n\n".join(parts)
    return SynthesisTask(
        cluster_id=cluster_cps[0].cluster_id,
        task_type=task_type,
        input_text=input_text,
        prompt=template.replace(_PLACEHOLDER, input_text),
    )


def validate_response(text: str, task_type: str) -> tuple[dict | None, list[str]]:
    """Parse and schema-check a raw model response.

    Returns (payload, []) when the response is exactly one conforming JSON
    object, else (None, error codes). Prose around an otherwise-valid object
    is its own error so callers can distinguish it from garbage output.
    """
    if task_type not in _REQUIRED_KEYS:
        raise ValueError(f"unknown task type {task_type!r}")
    try:
        obj = json.loads(text)
    except json.JSONDecodeError:
        start, end = text.find("{"), text.rfind("}")
        if 0 <= start < end:
            try:
                json.loads(text[start : end + 1])
                return None, ["extra_prose"]
            except json.JSONDecodeError:
                pass
        return None, ["non_json"]
    if not isinstance(obj, dict):
        return None, ["non_json"]

    errors: list[str] = []
    for key in _REQUIRED_KEYS[task_type]:
        if key not in obj:
            errors.append(f"missing_key:{key}")
    if errors:
        return None, errors

    if obj["question_type"] != task_type:
        errors.append("question_type_mismatch")

    for key in _REQUIRED_KEYS[task_type]:
        if key == "options":
            continue
        if not isinstance(obj[key], str) or not obj[key]:
            errors.append(f"invalid_value:{key}")

    if task_type == "single_choice":
        options = obj["options"]
        if not isinstance(options, dict):
            errors.append("invalid_value:options")
        else:
            for key in _OPTION_KEYS:
                if key not in options:
                    errors.append(f"missing_key:options.{key}")
                elif not isinstance(options[key], str) or not options[key]:
                    errors.append(f"invalid_value:options.{key}")

    legal = _LEGAL_ANSWERS.get(task_type)
    if legal is not None and isinstance(obj.get("correct_answer"), str):
        if obj["correct_answer"] not in legal:
            errors.append("illegal_answer")

    if errors:
        return None, errors
    return obj, []


class ReplayClient:
    """Feeds back a scripted response per prompt; the offline test double."""

    def __init__(self, script: Sequence[str], model_id: str = "replay"):
        self._script = list(script)
        self._cursor = 0
        self._model_id = model_id

    @property
    def model_id(self) -> str:
        return self._model_id

    def complete(self, prompt: str) -> str:
        if self._cursor >= len(self._script):
            raise IndexError("replay script exhausted")
        out = self._script[self._cursor]
        self._cursor += 1
        return out

    def issued_at(self) -> str:
        return "1970-01-01T00:00:00+00:00"


class StubClient:
    """Fabricates a minimal conforming object for whichever schema the prompt asks for."""

    model_id = "stub"

    def complete(self, prompt: str) -> str:
        if '"question_type": "single_choice"' in prompt:
            return json.dumps(
                {
                    "question_type": "single_choice",
                    "question": "Which statement best matches the input context?",
                    "options": {
                        "A": "The first reading.",
                        "B": "The second reading.",
                        "C": "The third reading.",
                        "D": "The fourth reading.",
                    },
                    "correct_answer": "A",
                    "reason": "Placeholder generated without model inference.",
                }
            )
        if '"question_type": "true_false"' in prompt:
            return json.dumps(
                {
                    "question_type": "true_false",
                    "statement": "The input context describes a culturally specific practice.",
                    "reason": "Placeholder generated without model inference.",
                    "correct_answer": "True",
                }
            )
        return json.dumps(
            {
                "question_type": "short_answer",
                "question": "What practice does the input context describe?",
                "reason": "Placeholder generated without model inference.",
                "correct_answer": "The practice named in the input context.",
            }
        )

    def issued_at(self) -> str:
        return "1970-01-01T00:00:00+00:00"


def synthesize(
    cps: Iterable[CulturePoint],
    client: LLMClient,
    task_types: Sequence[str] = TASK_TYPES,
    n: int = 10,
    multiplicity: int = 1,
) -> tuple[list[InstructionRecord], list[dict]]:
    """One record per (cluster, task type, multiplicity); rejects carry their error codes."""
    for t in task_types:
        if t not in TASK_TYPES:
            raise ValueError(f"unknown task type {t!r}")
    by_cluster: dict[int, list[CulturePoint]] = {}
    for cp in cps:
        by_cluster.setdefault(cp.cluster_id, []).append(cp)

    records: list[InstructionRecord] = []
    rejects: list[dict] = []
    for cluster_id in sorted(by_cluster):
        for task_type in task_types:
            for _ in range(multiplicity):
                task = build_prompt(by_cluster[cluster_id], task_type, n)
                raw = client.complete(task.prompt)
                payload, errors = validate_response(raw, task_type)
                if payload is None:
                    rejects.append(
                        {
                            "cluster_id": cluster_id,
                            "task_type": task_type,
                            "errors": errors,
                            "raw": raw,
                        }
                    )
                    continue
                records.append(
                    InstructionRecord(
                        task_type=task_type,
                        payload=payload,
                        cluster_id=cluster_id,
                        provenance={"model": client.model_id, "timestamp": client.issued_at()},
                    )
                )
    return records, rejects


def emit_dataset(records: Sequence[InstructionRecord], path: str | Path) -> None:
    """Write records as JSONL with stable field order; replaces any existing file atomically."""
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    with tmp.open("w", encoding="utf-8") as fh:
        for rec in records:
            obj = {
                "task_type": rec.task_type,
                "payload": rec.payload,
                "cluster_id": rec.cluster_id,
                "provenance": rec.provenance,
            }
            fh.write(json.dumps(obj, ensure_ascii=False) + "\n")
    tmp.replace(path)
