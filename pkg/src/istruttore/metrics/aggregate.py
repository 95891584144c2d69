"""Per-example score records and group-aware aggregation."""

from __future__ import annotations

from dataclasses import dataclass, field, fields
from typing import Optional

from istruttore.errors import ValidationError

METRIC_FIELDS = ("r1", "r2", "rl", "bs", "em", "f1", "em_gpt")


@dataclass
class ScoreReport:
    """Metric values for one example, or an aggregate over many.

    Missing metrics stay ``None`` (e.g. em/f1 on a summarization task, or
    BERTScore on an empty prediction). ``em_gpt`` aggregates as the
    fraction of verdict-1 examples.
    """

    id: str = ""
    system: str = "model"
    group: Optional[str] = None
    r1: Optional[float] = None
    r2: Optional[float] = None
    rl: Optional[float] = None
    bs: Optional[float] = None
    em: Optional[float] = None
    f1: Optional[float] = None
    em_gpt: Optional[float] = None
    flags: tuple[str, ...] = field(default_factory=tuple)

    def to_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)} | {"flags": list(self.flags)}

    @classmethod
    def from_dict(cls, data: dict) -> "ScoreReport":
        known = {f.name for f in fields(cls)}
        kwargs = {k: v for k, v in data.items() if k in known}
        kwargs["flags"] = tuple(kwargs.get("flags") or ())
        return cls(**kwargs)


def _mean(values: list[float]) -> Optional[float]:
    return sum(values) / len(values) if values else None


def _mean_metric(reports: list[ScoreReport], name: str) -> Optional[float]:
    return _mean([getattr(r, name) for r in reports if getattr(r, name) is not None])


def aggregate(per_example: list[ScoreReport], grouping: Optional[str] = None) -> ScoreReport:
    """Unweighted mean per metric; with ``grouping`` set, mean of group means.

    ``grouping`` names the attribute carrying the group key (``"group"`` in
    practice), so every group counts equally regardless of its size.
    """
    if not per_example:
        raise ValidationError("cannot aggregate an empty score list")
    result = ScoreReport(id="aggregate", system=per_example[0].system)
    if grouping is None:
        for name in METRIC_FIELDS:
            setattr(result, name, _mean_metric(per_example, name))
        return result
    groups: dict[str, list[ScoreReport]] = {}
    for report in per_example:
        key = getattr(report, grouping)
        groups.setdefault("" if key is None else str(key), []).append(report)
    for name in METRIC_FIELDS:
        group_means = [
            m for g in sorted(groups) if (m := _mean_metric(groups[g], name)) is not None
        ]
        setattr(result, name, _mean(group_means))
    return result
