"""Turn label masses into the normalized affirmative probability and persist records."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .logprobs import LabelMass


def normalize(masses: LabelMass | Mapping[str, float], affirmative: str) -> float | None:
    """mass(affirmative) / sum of all decision-label masses, or None when that sum is 0.

    Every label in the mapping is in the denominator, so negotiation's three labels
    (accept, reject, outside option) all count.
    """
    per_label = masses.per_label if isinstance(masses, LabelMass) else masses
    if affirmative not in per_label:
        raise KeyError(f"affirmative label {affirmative!r} not among {sorted(per_label)}")
    total = math.fsum(per_label.values())
    if total <= 0.0:
        return None
    return min(1.0, max(0.0, per_label[affirmative] / total))


@dataclass(frozen=True)
class PredictionRecord:
    decision_point_id: str
    model_id: str
    variant: str
    format: str  # "standard" | "chat"
    label_masses: LabelMass
    p_affirmative: float | None

    @property
    def valid(self) -> bool:
        return self.p_affirmative is not None

    @property
    def total_mass(self) -> float:
        return self.label_masses.total_mass

    @classmethod
    def build(cls, decision_point_id: str, model_id: str, variant: str, format: str,
              masses: LabelMass, affirmative: str) -> "PredictionRecord":
        return cls(decision_point_id, model_id, variant, format, masses, normalize(masses, affirmative))

    def to_dict(self) -> dict:
        return {
            "decision_point_id": self.decision_point_id,
            "model_id": self.model_id,
            "variant": self.variant,
            "format": self.format,
            "label_masses": dict(self.label_masses.per_label),
            "total_mass": self.label_masses.total_mass,
            "p_affirmative": self.p_affirmative,
        }

    @classmethod
    def from_dict(cls, raw: dict) -> "PredictionRecord":
        masses = LabelMass.from_per_label(raw["label_masses"])
        return cls(raw["decision_point_id"], raw["model_id"], raw["variant"], raw["format"],
                   masses, raw.get("p_affirmative"))


def mean_decision_mass(records: Sequence[PredictionRecord]) -> float:
    """Average total decision-token mass; invalid (zero-mass) records count at 0."""
    if not records:
        raise ValueError("mean_decision_mass needs at least one record")
    return math.fsum(r.total_mass for r in records) / len(records)


def write_records(records: Iterable[PredictionRecord], path: str | Path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + ".tmp")
    with tmp.open("w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(json.dumps(rec.to_dict(), sort_keys=True) + "\n")
    tmp.replace(path)


def read_records(path: str | Path) -> list[PredictionRecord]:
    with Path(path).open(encoding="utf-8") as fh:
        return [PredictionRecord.from_dict(json.loads(line)) for line in fh if line.strip()]
