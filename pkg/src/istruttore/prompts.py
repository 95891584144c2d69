"""Renders the two Italian instruction-prompt templates and extracts answers.

Rendering is byte-exact and reproducible: the repository ships golden files
(``fixtures/template_no_input.txt``, ``fixtures/template_with_input.txt``)
that every build must match byte-for-byte. Template choice is a pure
function of input presence.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

from istruttore.errors import ExtractionError, ValidationError
from istruttore.records import InstructionRecord, validate_record

PROMPT_NO_INPUT = (
    "Di seguito è riportata un'istruzione che descrive un task. "
    "Scrivete una risposta che completi adeguatamente la richiesta.\n"
    "\n"
    "### Istruzione:\n"
    "{instruction}\n"
    "\n"
    "### Risposta:\n"
)

PROMPT_WITH_INPUT = (
    "Di seguito è riportata un'istruzione che descrive un task, "
    "insieme ad un input che fornisce un contesto più ampio. "
    "Scrivete una risposta che completi adeguatamente la richiesta.\n"
    "\n"
    "### Istruzione:\n"
    "{instruction}\n"
    "\n"
    "### Input:\n"
    "{input}\n"
    "\n"
    "### Risposta:\n"
)

RESPONSE_MARKER = "### Risposta:"


class PromptMode(Enum):
    TRAINING = "training"
    INFERENCE = "inference"


@dataclass(frozen=True)
class RenderedPrompt:
    text: str
    has_input: bool
    includes_output: bool


def render_prompt(record: InstructionRecord, mode: PromptMode) -> RenderedPrompt:
    """Render ``record`` with the matching template.

    Training mode appends the record's output after the response header, so
    the inference rendering is always a strict prefix of the training one.
    """
    violations = validate_record(record)
    if violations:
        raise ValidationError("cannot render invalid record: " + "; ".join(violations))
    if record.input is not None:
        text = PROMPT_WITH_INPUT.format(instruction=record.instruction, input=record.input)
    else:
        text = PROMPT_NO_INPUT.format(instruction=record.instruction)
    includes_output = mode is PromptMode.TRAINING
    if includes_output:
        text += record.output
    return RenderedPrompt(text=text, has_input=record.input is not None, includes_output=includes_output)


def extract_response(generated: str) -> str:
    """Return the trimmed text after the last response marker.

    The last occurrence is used so instructions or inputs that themselves
    mention the marker do not confuse extraction.
    """
    idx = generated.rfind(RESPONSE_MARKER)
    if idx < 0:
        raise ExtractionError(f"generated text contains no '{RESPONSE_MARKER}' marker")
    return generated[idx + len(RESPONSE_MARKER):].strip()
