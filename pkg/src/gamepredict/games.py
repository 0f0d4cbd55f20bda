"""Data model for the six decision datasets and their line-delimited JSON format."""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field
from decimal import Decimal, InvalidOperation
from enum import Enum
from pathlib import Path
from typing import Any, Union

logger = logging.getLogger(__name__)

SCHEMA_VERSION = 1


class GameFamily(str, Enum):
    BARGAINING = "bargaining"
    PERSUASION = "persuasion"
    NEGOTIATION = "negotiation"
    MATRIX_REPEATED = "matrix_repeated"
    MATRIX_ONESHOT = "matrix_oneshot"
    LOTTERY = "lottery"

    @property
    def label_arity(self) -> int:
        return 3 if self is GameFamily.NEGOTIATION else 2

    @property
    def aggregate_level(self) -> bool:
        """True when human behaviour is a per-problem choice rate, not one choice per row."""
        return self in (GameFamily.MATRIX_ONESHOT, GameFamily.LOTTERY)

    @property
    def default_labels(self) -> tuple[str, ...]:
        return DEFAULT_LABELS[self]


DEFAULT_LABELS: dict[GameFamily, tuple[str, ...]] = {
    GameFamily.BARGAINING: ("accept", "reject"),
    GameFamily.PERSUASION: ("yes", "no"),
    GameFamily.NEGOTIATION: ("AcceptOffer", "RejectOffer", "DealWithJohn"),
    GameFamily.MATRIX_REPEATED: ("cooperate", "defect"),
    GameFamily.MATRIX_ONESHOT: ("A", "B"),
    GameFamily.LOTTERY: ("A", "B"),
}

MATRIX_REPEATED_MAX_ROUNDS = 10

TOPOLOGIES = (
    "harmony", "concord", "peace", "safecoord", "assurance", "dilemma",
    "deadlock", "chicken", "staghunt", "hero", "leader", "compromise",
)


class DatasetError(ValueError):
    """A record failed to parse or validate. Carries the 1-based line number and field."""

    def __init__(self, message: str, line: int | None = None, field_name: str | None = None):
        self.reason = message
        self.line = line
        self.field_name = field_name
        where = []
        if line is not None:
            where.append(f"line {line}")
        if field_name is not None:
            where.append(f"field '{field_name}'")
        prefix = f"{', '.join(where)}: " if where else ""
        super().__init__(prefix + message)


class FamilyMismatchError(DatasetError):
    pass


class UnknownLabelError(ValueError):
    pass


# -- money -----------------------------------------------------------------

@dataclass(frozen=True, order=True)
class Money:
    """An amount in integer minor units (cents for USD)."""

    minor: int
    currency: str = "USD"

    @classmethod
    def parse(cls, value: Any) -> "Money":
        if isinstance(value, Money):
            return value
        if isinstance(value, dict):
            if "minor" in value:
                return cls(int(value["minor"]), str(value.get("currency", "USD")))
            if "amount" in value:
                return cls(_to_minor(value["amount"]), str(value.get("currency", "USD")))
            raise ValueError(f"money object needs 'minor' or 'amount': {value!r}")
        return cls(_to_minor(value))

    @property
    def major(self) -> Decimal:
        return Decimal(self.minor) / 100

    def to_json(self) -> dict[str, Any]:
        return {"minor": self.minor, "currency": self.currency}

    def __str__(self) -> str:
        symbol = "$" if self.currency == "USD" else f"{self.currency} "
        sign = "-" if self.minor < 0 else ""
        whole, cents = divmod(abs(self.minor), 100)
        if cents:
            return f"{sign}{symbol}{whole:,}.{cents:02d}"
        return f"{sign}{symbol}{whole:,}"


def _to_minor(value: Any) -> int:
    if isinstance(value, bool):
        raise ValueError("boolean is not a money amount")
    try:
        amount = Decimal(str(value))
    except InvalidOperation as exc:
        raise ValueError(f"not a money amount: {value!r}") from exc
    minor = amount * 100
    if minor != minor.to_integral_value():
        raise ValueError(f"money amount has sub-cent precision: {value!r}")
    return int(minor)


# -- configs ---------------------------------------------------------------

def _require(cond: bool, message: str, field_name: str) -> None:
    if not cond:
        raise DatasetError(message, field_name=field_name)


def _prob(value: Any, field_name: str, *, open_interval: bool = False) -> float:
    try:
        p = float(value)
    except (TypeError, ValueError):
        raise DatasetError(f"expected a probability, got {value!r}", field_name=field_name)
    ok = 0.0 < p < 1.0 if open_interval else 0.0 <= p <= 1.0
    _require(ok and math.isfinite(p), f"probability out of range: {p}", field_name)
    return p


def _bool(value: Any, field_name: str) -> bool:
    if isinstance(value, bool):
        return value
    raise DatasetError(f"expected a boolean, got {value!r}", field_name=field_name)


def _money(value: Any, field_name: str) -> Money:
    try:
        return Money.parse(value)
    except (TypeError, ValueError) as exc:
        raise DatasetError(str(exc), field_name=field_name)


def _split_known(raw: dict[str, Any], known: tuple[str, ...]) -> tuple[dict[str, Any], dict[str, Any]]:
    body = {k: raw[k] for k in known if k in raw}
    extras = {k: v for k, v in raw.items() if k not in known}
    missing = [k for k in known if k not in raw]
    if missing:
        raise DatasetError(f"missing config key(s): {', '.join(missing)}", field_name=f"config.{missing[0]}")
    return body, extras


@dataclass(frozen=True)
class BargainingConfig:
    stakes: Money
    information: str
    messages_allowed: bool
    delta1: float
    delta2: float
    max_rounds: int | None  # None = unbounded
    extras: dict[str, Any] = field(default_factory=dict, compare=False)

    KEYS = ("stakes", "information", "messages_allowed", "delta1", "delta2", "max_rounds")

    def __post_init__(self) -> None:
        _require(self.stakes.minor > 0, "stakes must be positive", "config.stakes")
        _require(self.information in ("complete", "incomplete"), f"bad information value {self.information!r}", "config.information")
        for name in ("delta1", "delta2"):
            d = getattr(self, name)
            _require(0.0 < d <= 1.0, f"discount factor must be in (0, 1], got {d}", f"config.{name}")
        _require(self.max_rounds is None or self.max_rounds >= 1, "max_rounds must be positive", "config.max_rounds")

    @classmethod
    def from_dict(cls, raw: dict[str, Any]) -> "BargainingConfig":
        body, extras = _split_known(raw, cls.KEYS)
        max_rounds = body["max_rounds"]
        if max_rounds in (None, "inf", "unbounded"):
            max_rounds = None
        return cls(
            stakes=_money(body["stakes"], "config.stakes"),
            information=body["information"],
            messages_allowed=_bool(body["messages_allowed"], "config.messages_allowed"),
            delta1=float(body["delta1"]),
            delta2=float(body["delta2"]),
            max_rounds=None if max_rounds is None else int(max_rounds),
            extras=extras,
        )

    def to_dict(self) -> dict[str, Any]:
        return {
            "stakes": self.stakes.to_json(),
            "information": self.information,
            "messages_allowed": self.messages_allowed,
            "delta1": self.delta1,
            "delta2": self.delta2,
            "max_rounds": self.max_rounds,
            **self.extras,
        }


@dataclass(frozen=True)
class PersuasionConfig:
    quality_prob_p: float
    value_v: float
    seller_knows_quality: bool
    buyer_myopic: bool
    message_type: str
    price: Money
    extras: dict[str, Any] = field(default_factory=dict, compare=False)

    KEYS = ("quality_prob_p", "value_v", "seller_knows_quality", "buyer_myopic", "message_type", "price")

    def __post_init__(self) -> None:
        _require(self.value_v > 1.0, f"value_v must exceed 1, got {self.value_v}", "config.value_v")
        _require(self.message_type in ("text", "binary"), f"bad message_type {self.message_type!r}", "config.message_type")
        _require(self.price.minor > 0, "price must be positive", "config.price")

    @classmethod
    def from_dict(cls, raw: dict[str, Any]) -> "PersuasionConfig":
        body, extras = _split_known(raw, cls.KEYS)
        return cls(
            quality_prob_p=_prob(body["quality_prob_p"], "config.quality_prob_p", open_interval=True),
            value_v=float(body["value_v"]),
            seller_knows_quality=_bool(body["seller_knows_quality"], "config.seller_knows_quality"),
            buyer_myopic=_bool(body["buyer_myopic"], "config.buyer_myopic"),
            message_type=body["message_type"],
            price=_money(body["price"], "config.price"),
            extras=extras,
        )

    def to_dict(self) -> dict[str, Any]:
        return {
            "quality_prob_p": self.quality_prob_p,
            "value_v": self.value_v,
            "seller_knows_quality": self.seller_knows_quality,
            "buyer_myopic": self.buyer_myopic,
            "message_type": self.message_type,
            "price": self.price.to_json(),
            **self.extras,
        }


@dataclass(frozen=True)
class NegotiationConfig:
    price: Money
    information: str
    messages_allowed: bool
    max_rounds: int
    buyer_value_mult: float
    seller_value_mult: float
    extras: dict[str, Any] = field(default_factory=dict, compare=False)

    KEYS = ("price", "information", "messages_allowed", "max_rounds", "buyer_value_mult", "seller_value_mult")

    def __post_init__(self) -> None:
        _require(self.price.minor > 0, "price must be positive", "config.price")
        _require(self.information in ("complete", "incomplete"), f"bad information value {self.information!r}", "config.information")
        _require(self.max_rounds >= 1, "max_rounds must be positive", "config.max_rounds")
        for name in ("buyer_value_mult", "seller_value_mult"):
            _require(getattr(self, name) > 0, f"{name} must be positive", f"config.{name}")

    @property
    def buyer_value(self) -> Money:
        return Money(round(self.price.minor * self.buyer_value_mult), self.price.currency)

    @property
    def seller_value(self) -> Money:
        return Money(round(self.price.minor * self.seller_value_mult), self.price.currency)

    @property
    def value_asymmetry(self) -> str:
        if self.buyer_value_mult > self.seller_value_mult:
            return "buyer>seller"
        if self.seller_value_mult > self.buyer_value_mult:
            return "seller>buyer"
        return "equal"

    @classmethod
    def from_dict(cls, raw: dict[str, Any]) -> "NegotiationConfig":
        body, extras = _split_known(raw, cls.KEYS)
        return cls(
            price=_money(body["price"], "config.price"),
            information=body["information"],
            messages_allowed=_bool(body["messages_allowed"], "config.messages_allowed"),
            max_rounds=int(body["max_rounds"]),
            buyer_value_mult=float(body["buyer_value_mult"]),
            seller_value_mult=float(body["seller_value_mult"]),
            extras=extras,
        )

    def to_dict(self) -> dict[str, Any]:
        return {
            "price": self.price.to_json(),
            "information": self.information,
            "messages_allowed": self.messages_allowed,
            "max_rounds": self.max_rounds,
            "buyer_value_mult": self.buyer_value_mult,
            "seller_value_mult": self.seller_value_mult,
            **self.extras,
        }


def _matrix(value: Any, field_name: str) -> tuple[tuple[float, float], tuple[float, float]]:
    try:
        rows = tuple(tuple(float(x) for x in row) for row in value)
    except (TypeError, ValueError):
        raise DatasetError(f"expected a 2x2 numeric matrix, got {value!r}", field_name=field_name)
    _require(len(rows) == 2 and all(len(r) == 2 for r in rows), "matrix must be 2x2", field_name)
    _require(all(math.isfinite(x) for r in rows for x in r), "payoffs must be finite", field_name)
    return rows  # type: ignore[return-value]


@dataclass(frozen=True)
class MatrixRepeatedConfig:
    """One of the repeated 2x2 games (e.g. "pd" or "bos") with its payoff bimatrix."""

    game: str
    row_payoffs: tuple[tuple[float, float], tuple[float, float]]
    col_payoffs: tuple[tuple[float, float], tuple[float, float]]
    extras: dict[str, Any] = field(default_factory=dict, compare=False)

    KEYS = ("game", "row_payoffs", "col_payoffs")

    @classmethod
    def from_dict(cls, raw: dict[str, Any]) -> "MatrixRepeatedConfig":
        body, extras = _split_known(raw, cls.KEYS)
        return cls(
            game=str(body["game"]),
            row_payoffs=_matrix(body["row_payoffs"], "config.row_payoffs"),
            col_payoffs=_matrix(body["col_payoffs"], "config.col_payoffs"),
            extras=extras,
        )

    def to_dict(self) -> dict[str, Any]:
        return {
            "game": self.game,
            "row_payoffs": [list(r) for r in self.row_payoffs],
            "col_payoffs": [list(r) for r in self.col_payoffs],
            **self.extras,
        }


@dataclass(frozen=True)
class MatrixGame2x2:
    row_payoffs: tuple[tuple[float, float], tuple[float, float]]
    col_payoffs: tuple[tuple[float, float], tuple[float, float]]
    topology: str
    counterbalanced: bool = False
    extras: dict[str, Any] = field(default_factory=dict, compare=False)

    KEYS = ("row_payoffs", "col_payoffs", "topology", "counterbalanced")

    def __post_init__(self) -> None:
        _require(self.topology in TOPOLOGIES, f"unknown topology {self.topology!r}", "config.topology")

    @classmethod
    def from_dict(cls, raw: dict[str, Any]) -> "MatrixGame2x2":
        raw = dict(raw)
        raw.setdefault("counterbalanced", False)
        body, extras = _split_known(raw, cls.KEYS)
        return cls(
            row_payoffs=_matrix(body["row_payoffs"], "config.row_payoffs"),
            col_payoffs=_matrix(body["col_payoffs"], "config.col_payoffs"),
            topology=str(body["topology"]),
            counterbalanced=_bool(body["counterbalanced"], "config.counterbalanced"),
            extras=extras,
        )

    def to_dict(self) -> dict[str, Any]:
        return {
            "row_payoffs": [list(r) for r in self.row_payoffs],
            "col_payoffs": [list(r) for r in self.col_payoffs],
            "topology": self.topology,
            "counterbalanced": self.counterbalanced,
            **self.extras,
        }


Outcome = tuple[Money, float]


def _lottery_option(value: Any, field_name: str) -> tuple[Outcome, ...]:
    try:
        outcomes = tuple((_money(o[0] if not isinstance(o, dict) else o["outcome"], field_name),
                          float(o[1] if not isinstance(o, dict) else o["prob"])) for o in value)
    except (TypeError, KeyError, IndexError):
        raise DatasetError(f"expected a list of (outcome, prob), got {value!r}", field_name=field_name)
    _require(len(outcomes) >= 1, "lottery option has no outcomes", field_name)
    _require(all(0.0 <= p <= 1.0 for _, p in outcomes), "outcome probability out of range", field_name)
    _require(abs(sum(p for _, p in outcomes) - 1.0) <= 1e-9, "outcome probabilities must sum to 1", field_name)
    return outcomes


@dataclass(frozen=True)
class LotteryProblem:
    option_a: tuple[Outcome, ...]
    option_b: tuple[Outcome, ...]
    choice_rate_a: float | None = None
    n_participants: int | None = None
    extras: dict[str, Any] = field(default_factory=dict, compare=False)

    KEYS = ("option_a", "option_b")

    @classmethod
    def from_dict(cls, raw: dict[str, Any]) -> "LotteryProblem":
        body, extras = _split_known(raw, cls.KEYS)
        return cls(
            option_a=_lottery_option(body["option_a"], "config.option_a"),
            option_b=_lottery_option(body["option_b"], "config.option_b"),
            extras=extras,
        )

    def expected_value(self, option: str) -> float:
        outcomes = self.option_a if option == "A" else self.option_b
        return float(sum(m.major * Decimal(str(p)) for m, p in outcomes))

    def to_dict(self) -> dict[str, Any]:
        def enc(opt):
            return [{"outcome": m.to_json(), "prob": p} for m, p in opt]
        return {"option_a": enc(self.option_a), "option_b": enc(self.option_b), **self.extras}


GameConfig = Union[
    BargainingConfig, PersuasionConfig, NegotiationConfig,
    MatrixRepeatedConfig, MatrixGame2x2, LotteryProblem,
]

CONFIG_TYPES: dict[GameFamily, type] = {
    GameFamily.BARGAINING: BargainingConfig,
    GameFamily.PERSUASION: PersuasionConfig,
    GameFamily.NEGOTIATION: NegotiationConfig,
    GameFamily.MATRIX_REPEATED: MatrixRepeatedConfig,
    GameFamily.MATRIX_ONESHOT: MatrixGame2x2,
    GameFamily.LOTTERY: LotteryProblem,
}


# -- decision points -------------------------------------------------------

@dataclass(frozen=True)
class Turn:
    speaker: str
    text: str = ""
    structured_action: dict[str, Any] | None = None

    def __post_init__(self) -> None:
        _require(bool(self.speaker), "turn speaker must be nonempty", "history.speaker")
        _require(bool(self.text) or self.structured_action is not None,
                 "turn needs text or structured_action", "history")

    def to_dict(self) -> dict[str, Any]:
        out: dict[str, Any] = {"speaker": self.speaker, "text": self.text}
        if self.structured_action is not None:
            out["action"] = self.structured_action
        return out


@dataclass(frozen=True)
class DecisionPoint:
    id: str
    family: GameFamily
    config: GameConfig
    round_index: int
    role: str
    history: tuple[Turn, ...]
    decision_labels: tuple[str, ...]
    affirmative_label: str
    human_choice: str | None
    aggregate_choice_rate: float | None = None
    n_participants: int | None = None

    def __post_init__(self) -> None:
        labels = self.decision_labels
        _require(bool(self.id), "id must be nonempty", "id")
        _require(isinstance(self.config, CONFIG_TYPES[self.family]),
                 f"config type {type(self.config).__name__} does not match family {self.family.value}", "config")
        _require(len(labels) == self.family.label_arity,
                 f"{self.family.value} needs {self.family.label_arity} labels, got {len(labels)}", "labels")
        _require(all(labels) and len(set(labels)) == len(labels), "labels must be distinct and nonempty", "labels")
        _require(self.affirmative_label in labels, f"affirmative label {self.affirmative_label!r} not in labels", "affirmative_label")
        _require(self.round_index >= 1, "round_index must be >= 1", "round_index")
        if self.family is GameFamily.MATRIX_REPEATED:
            _require(self.round_index <= MATRIX_REPEATED_MAX_ROUNDS,
                     f"matrix_repeated round_index must be <= {MATRIX_REPEATED_MAX_ROUNDS}", "round_index")
        if self.family.aggregate_level:
            _require(self.aggregate_choice_rate is not None, "aggregate-level record needs aggregate_choice_rate", "aggregate_choice_rate")
            _require(0.0 <= self.aggregate_choice_rate <= 1.0, "aggregate_choice_rate out of [0, 1]", "aggregate_choice_rate")
            _require(self.n_participants is not None and self.n_participants >= 1, "n_participants must be >= 1", "n_participants")
            _require(self.human_choice is None or self.human_choice in labels,
                     f"human_choice {self.human_choice!r} not in labels", "human_choice")
        else:
            _require(self.aggregate_choice_rate is None, "decision-level record must not carry aggregate_choice_rate", "aggregate_choice_rate")
            _require(self.human_choice in labels, f"human_choice {self.human_choice!r} not in labels {list(labels)}", "human_choice")

    @property
    def human_coded(self) -> int:
        return code_decision(self, self.human_choice)

    @property
    def human_target(self) -> float:
        """Value the model prediction is correlated against."""
        if self.family.aggregate_level:
            return float(self.aggregate_choice_rate)
        return float(self.human_coded)

    def to_dict(self) -> dict[str, Any]:
        out: dict[str, Any] = {
            "id": self.id,
            "family": self.family.value,
            "config": self.config.to_dict(),
            "round_index": self.round_index,
            "role": self.role,
            "history": [t.to_dict() for t in self.history],
            "labels": list(self.decision_labels),
            "affirmative_label": self.affirmative_label,
            "human_choice": self.human_choice,
        }
        if self.family.aggregate_level:
            out["aggregate_choice_rate"] = self.aggregate_choice_rate
            out["n_participants"] = self.n_participants
        return out

    @classmethod
    def from_dict(cls, raw: dict[str, Any], family: GameFamily | None = None) -> "DecisionPoint":
        if not isinstance(raw, dict):
            raise DatasetError("record is not an object")
        fam_raw = raw.get("family", family.value if family else None)
        try:
            fam = GameFamily(fam_raw)
        except ValueError:
            raise DatasetError(f"unknown family {fam_raw!r}", field_name="family")
        if family is not None and fam is not family:
            raise FamilyMismatchError(f"record family {fam.value!r} does not match dataset family {family.value!r}",
                                      field_name="family")
        for key in ("id", "config"):
            if key not in raw:
                raise DatasetError("missing required field", field_name=key)
        if not isinstance(raw["config"], dict):
            raise DatasetError("config must be an object", field_name="config")
        config = CONFIG_TYPES[fam].from_dict(raw["config"])
        history = []
        for i, t in enumerate(raw.get("history") or []):
            if not isinstance(t, dict) or "speaker" not in t:
                raise DatasetError(f"turn {i} is malformed", field_name=f"history[{i}]")
            history.append(Turn(str(t["speaker"]), str(t.get("text") or ""), t.get("action")))
        labels = tuple(raw.get("labels") or fam.default_labels)
        try:
            round_index = int(raw.get("round_index", 1))
        except (TypeError, ValueError):
            raise DatasetError(f"round_index must be an integer, got {raw.get('round_index')!r}", field_name="round_index")
        rate = raw.get("aggregate_choice_rate")
        n_part = raw.get("n_participants")
        if fam is GameFamily.LOTTERY:
            rate = rate if rate is not None else raw["config"].get("choice_rate_a")
            n_part = n_part if n_part is not None else raw["config"].get("n_participants")
            config = LotteryProblem(config.option_a, config.option_b,
                                    None if rate is None else float(rate),
                                    None if n_part is None else int(n_part),
                                    {k: v for k, v in config.extras.items() if k not in ("choice_rate_a", "n_participants")})
        return cls(
            id=str(raw["id"]),
            family=fam,
            config=config,
            round_index=round_index,
            role=str(raw.get("role", "")),
            history=tuple(history),
            decision_labels=labels,
            affirmative_label=str(raw.get("affirmative_label", labels[0])),
            human_choice=raw.get("human_choice"),
            aggregate_choice_rate=None if rate is None else float(rate),
            n_participants=None if n_part is None else int(n_part),
        )


def code_decision(dp: DecisionPoint, label: str) -> int:
    """Binary coding used for correlation: 1 for the affirmative label, 0 for every other label.

    In negotiation both RejectOffer and DealWithJohn code to 0.
    """
    if label not in dp.decision_labels:
        raise UnknownLabelError(f"label {label!r} is not one of {list(dp.decision_labels)} for {dp.id}")
    return 1 if label == dp.affirmative_label else 0


# -- files -----------------------------------------------------------------

def manifest_path(path: Path) -> Path:
    return path.with_name(path.name + ".manifest.json")


def load_dataset(path: str | Path, family: GameFamily | str) -> list[DecisionPoint]:
    """Read a JSONL dataset. Blank lines are skipped; line numbers in errors are 1-based."""
    path = Path(path)
    family = GameFamily(family)
    points: list[DecisionPoint] = []
    seen: set[str] = set()
    with path.open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                raw = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DatasetError(f"invalid JSON: {exc.msg}", line=lineno) from exc
            try:
                dp = DecisionPoint.from_dict(raw, family)
            except DatasetError as exc:
                raise type(exc)(exc.reason, line=lineno, field_name=exc.field_name) from exc
            except (KeyError, TypeError, ValueError) as exc:
                raise DatasetError(f"{type(exc).__name__}: {exc}", line=lineno) from exc
            if dp.id in seen:
                raise DatasetError(f"duplicate id {dp.id!r}", line=lineno, field_name="id")
            seen.add(dp.id)
            points.append(dp)

    mpath = manifest_path(path)
    if mpath.exists():
        manifest = json.loads(mpath.read_text(encoding="utf-8"))
        if manifest.get("family") not in (None, family.value):
            raise FamilyMismatchError(f"manifest declares family {manifest['family']!r}, expected {family.value!r}")
        declared = manifest.get("count")
        if declared is not None and declared != len(points):
            raise DatasetError(f"manifest declares {declared} records, file has {len(points)}")
    return points


def dump_dataset(points: list[DecisionPoint], path: str | Path, family: GameFamily | str | None = None) -> None:
    """Write records as JSONL plus a sidecar manifest."""
    path = Path(path)
    if family is None:
        if not points:
            raise ValueError("family is required to dump an empty dataset")
        family = points[0].family
    family = GameFamily(family)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8") as fh:
        for dp in points:
            if dp.family is not family:
                raise FamilyMismatchError(f"{dp.id} is {dp.family.value}, dataset is {family.value}")
            fh.write(json.dumps(dp.to_dict(), sort_keys=True) + "\n")
    manifest = {"family": family.value, "count": len(points), "schema_version": SCHEMA_VERSION}
    manifest_path(path).write_text(json.dumps(manifest, sort_keys=True, indent=2) + "\n", encoding="utf-8")


# -- pair registry ---------------------------------------------------------

@dataclass(frozen=True)
class PairSpec:
    pair_id: int
    base_model_id: str
    aligned_model_id: str
    provider: str
    param_count: float  # billions

    def __post_init__(self) -> None:
        if self.base_model_id == self.aligned_model_id:
            raise ValueError(f"pair {self.pair_id}: base and aligned model are identical")
        if not self.param_count > 0:
            raise ValueError(f"pair {self.pair_id}: param_count must be positive")

    def to_dict(self) -> dict[str, Any]:
        return {
            "pair_id": self.pair_id,
            "base_model_id": self.base_model_id,
            "aligned_model_id": self.aligned_model_id,
            "provider": self.provider,
            "param_count": self.param_count,
        }


def parse_registry(raw: Any) -> list[PairSpec]:
    entries = raw["pairs"] if isinstance(raw, dict) else raw
    pairs = []
    ids: set[int] = set()
    for i, e in enumerate(entries):
        try:
            spec = PairSpec(int(e["pair_id"]), str(e["base_model_id"]), str(e["aligned_model_id"]),
                            str(e.get("provider", "")), float(e["param_count"]))
        except KeyError as exc:
            raise ValueError(f"registry entry {i}: missing {exc.args[0]!r}") from exc
        if spec.pair_id in ids:
            raise ValueError(f"registry entry {i}: duplicate pair_id {spec.pair_id}")
        ids.add(spec.pair_id)
        pairs.append(spec)
    return pairs


def load_registry(path: str | Path) -> list[PairSpec]:
    return parse_registry(json.loads(Path(path).read_text(encoding="utf-8")))


def builtin_registry() -> list[PairSpec]:
    """The 120 same-provider pairs evaluated in the original study."""
    from importlib.resources import files

    return parse_registry(json.loads(files("gamepredict.data").joinpath("pairs.v1.json").read_text(encoding="utf-8")))
