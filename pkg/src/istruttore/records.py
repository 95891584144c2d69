"""Instruction datasets and the three evaluation-task dataset formats.

Parsing and serialization are pure functions over bytes; all record types
are immutable and safe to share across threads. An Alpaca file is a single
JSON array of ``{instruction, input, output}`` string triples where an empty
``input`` means "no additional context"; parsing normalizes it to ``None``
so downstream template selection is a total function of the record.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from enum import Enum
from typing import Optional, Union

from istruttore.errors import DecodeError, SchemaError, ValidationError


class DatasetFormat(Enum):
    ALPACA_JSON = "alpaca"
    SQUAD_IT = "squad-it"
    NEWS_SUM = "newssum"
    XFORMAL = "xformal"


class Newspaper(Enum):
    FANPAGE = "fanpage"
    ILPOST = "ilpost"


class Direction(Enum):
    FORMAL_TO_INFORMAL = "f2i"
    INFORMAL_TO_FORMAL = "i2f"


@dataclass(frozen=True)
class InstructionRecord:
    """One instruction-tuning triple; ``input`` is absent when ``None``."""

    instruction: str
    input: Optional[str]
    output: str


@dataclass(frozen=True)
class DatasetManifest:
    records: tuple[InstructionRecord, ...]
    source_name: str = "dataset"

    @property
    def record_count(self) -> int:
        return len(self.records)


@dataclass(frozen=True)
class SquadItRecord:
    paragraph: str
    question: str
    gold_answers: tuple[str, ...]


@dataclass(frozen=True)
class NewsSumRecord:
    article: str
    reference_summary: str
    newspaper: Newspaper


@dataclass(frozen=True)
class XformalRecord:
    source: str
    references: tuple[str, ...]
    direction: Direction


TaskRecord = Union[SquadItRecord, NewsSumRecord, XformalRecord]


def normalize_record(record: InstructionRecord) -> InstructionRecord:
    """Map an empty or whitespace-only ``input`` to absent. Idempotent."""
    if record.input is not None and record.input.strip() == "":
        return replace(record, input=None)
    return record


def validate_record(record: InstructionRecord) -> list[str]:
    """Return the list of violated invariants; an empty list means valid."""
    violations = []
    if record.instruction.strip() == "":
        violations.append("instruction is empty after whitespace trimming")
    if record.output.strip() == "":
        violations.append("output is empty after whitespace trimming")
    if record.input is not None and record.input.strip() == "":
        violations.append("input is neither absent nor non-empty")
    return violations


def _decode(raw: bytes) -> str:
    try:
        return raw.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise DecodeError(
            f"input is not valid UTF-8 at byte offset {exc.start}", offset=exc.start
        ) from exc


def _load_json(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"malformed JSON: {exc}") from exc


def _require(obj: dict, key: str, index: int, kind: type = str):
    if not isinstance(obj, dict):
        raise SchemaError(f"record {index}: expected an object, got {type(obj).__name__}")
    if key not in obj:
        raise SchemaError(f"record {index}: missing required key '{key}'")
    value = obj[key]
    if not isinstance(value, kind):
        raise SchemaError(
            f"record {index}: key '{key}' must be {kind.__name__}, got {type(value).__name__}"
        )
    return value


def _parse_alpaca(text: str, source_name: str) -> DatasetManifest:
    data = _load_json(text)
    if not isinstance(data, list):
        raise SchemaError("Alpaca dataset must be a top-level JSON array")
    records = []
    for i, obj in enumerate(data):
        record = InstructionRecord(
            instruction=_require(obj, "instruction", i),
            input=_require(obj, "input", i),
            output=_require(obj, "output", i),
        )
        record = normalize_record(record)
        violations = validate_record(record)
        if violations:
            raise ValidationError(f"record {i}: " + "; ".join(violations))
        records.append(record)
    return DatasetManifest(records=tuple(records), source_name=source_name)


def _parse_squad(text: str) -> list[SquadItRecord]:
    data = _load_json(text)
    if not isinstance(data, list):
        raise SchemaError("SQuAD-IT dataset must be a top-level JSON array")
    records = []
    for i, obj in enumerate(data):
        answers = _require(obj, "answers", i, list)
        if not answers or not all(isinstance(a, str) for a in answers):
            raise ValidationError(f"record {i}: answers must be a non-empty list of strings")
        question = _require(obj, "question", i)
        if question.strip() == "":
            raise ValidationError(f"record {i}: question is empty")
        records.append(
            SquadItRecord(
                paragraph=_require(obj, "paragraph", i),
                question=question,
                gold_answers=tuple(answers),
            )
        )
    return records


def _iter_jsonl(text: str):
    for i, line in enumerate(text.splitlines()):
        if line.strip() == "":
            continue
        try:
            yield i, json.loads(line)
        except json.JSONDecodeError as exc:
            raise SchemaError(f"line {i}: malformed JSON: {exc}") from exc


def _parse_newssum(text: str) -> list[NewsSumRecord]:
    records = []
    for i, obj in _iter_jsonl(text):
        paper = _require(obj, "newspaper", i)
        try:
            newspaper = Newspaper(paper)
        except ValueError:
            raise SchemaError(
                f"record {i}: newspaper must be one of 'fanpage', 'ilpost', got '{paper}'"
            ) from None
        records.append(
            NewsSumRecord(
                article=_require(obj, "article", i),
                reference_summary=_require(obj, "reference_summary", i),
                newspaper=newspaper,
            )
        )
    return records


def _parse_xformal(text: str) -> list[XformalRecord]:
    records = []
    for i, obj in _iter_jsonl(text):
        refs = _require(obj, "references", i, list)
        if not refs or not all(isinstance(r, str) for r in refs):
            raise ValidationError(f"record {i}: references must be a non-empty list of strings")
        raw = _require(obj, "direction", i)
        try:
            direction = Direction(raw)
        except ValueError:
            raise SchemaError(
                f"record {i}: direction must be 'f2i' or 'i2f', got '{raw}'"
            ) from None
        records.append(
            XformalRecord(
                source=_require(obj, "source", i),
                references=tuple(refs),
                direction=direction,
            )
        )
    return records


def parse_dataset(
    raw_bytes: bytes,
    fmt: DatasetFormat,
    source_name: str = "dataset",
) -> Union[DatasetManifest, list[TaskRecord]]:
    """Parse ``raw_bytes`` in the declared format.

    Returns a :class:`DatasetManifest` for Alpaca input and a plain record
    list for the task formats. Record order is preserved; no record is ever
    silently dropped.
    """
    text = _decode(raw_bytes)
    if fmt is DatasetFormat.ALPACA_JSON:
        return _parse_alpaca(text, source_name)
    if fmt is DatasetFormat.SQUAD_IT:
        return _parse_squad(text)
    if fmt is DatasetFormat.NEWS_SUM:
        return _parse_newssum(text)
    if fmt is DatasetFormat.XFORMAL:
        return _parse_xformal(text)
    raise ValidationError(f"unknown dataset format: {fmt!r}")


def serialize_dataset(manifest: DatasetManifest) -> bytes:
    """Serialize a manifest back to Alpaca JSON bytes.

    Absent ``input`` is written as an empty string for compatibility with
    the Alpaca file layout; ``parse_dataset(serialize_dataset(m))`` yields
    records structurally equal to ``m.records``.
    """
    for i, record in enumerate(manifest.records):
        violations = validate_record(record)
        if violations:
            raise ValidationError(f"record {i}: " + "; ".join(violations))
    payload = [
        {
            "instruction": r.instruction,
            "input": r.input if r.input is not None else "",
            "output": r.output,
        }
        for r in manifest.records
    ]
    return json.dumps(payload, ensure_ascii=False, indent=2).encode("utf-8")


def load_dataset(path, fmt: DatasetFormat, source_name: str | None = None):
    """Read and parse a dataset file."""
    with open(path, "rb") as handle:
        raw = handle.read()
    return parse_dataset(raw, fmt, source_name=source_name or str(path))
