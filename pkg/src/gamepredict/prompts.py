"""Render decision points into plain-completion or chat-templated prompts."""

from __future__ import annotations

import json
import logging
import re
from dataclasses import dataclass, replace
from functools import lru_cache
from importlib.resources import files
from pathlib import Path
from typing import Any, Mapping, Sequence

from .games import (
    BargainingConfig,
    DecisionPoint,
    GameFamily,
    LotteryProblem,
    MatrixGame2x2,
    MatrixRepeatedConfig,
    NegotiationConfig,
    PersuasionConfig,
)

logger = logging.getLogger(__name__)

JSON_SUFFIX = '{"decision": "'
FORMATS = ("standard", "chat")
CLUSTERS = ("baseline", "framing", "persona", "format", "structure")

# Families where every variant is meaningful; the rest need allow_any_variant=True.
VARIANT_FAMILIES = frozenset({GameFamily.BARGAINING, GameFamily.NEGOTIATION, GameFamily.PERSUASION})


class PromptError(ValueError):
    pass


@dataclass(frozen=True)
class PromptVariant:
    name: str
    cluster: str
    suffix: str = JSON_SUFFIX
    system_prefix: str | None = None
    drops_history: bool = False
    swaps_label_order: bool = False
    low_mass_risk: bool = False


_VARIANTS: tuple[PromptVariant, ...] = (
    PromptVariant("standard", "baseline"),
    PromptVariant("predict_human", "framing", system_prefix="Predict what a participant decided."),
    PromptVariant("observer", "framing", system_prefix="You are an external observer of the game described below."),
    PromptVariant("reversed_roles", "framing",
                  system_prefix="You are the player who made the offer, predicting how the receiver will respond."),
    PromptVariant("naive", "persona", system_prefix="You have no prior experience with games like this."),
    PromptVariant("expert", "persona", system_prefix="You are a behavioral economics researcher."),
    PromptVariant("fairness", "persona", system_prefix="You value fairness."),
    PromptVariant("selfish", "persona", system_prefix="You want to maximize your personal gain."),
    PromptVariant("emotional", "persona", system_prefix="You decide by gut feeling."),
    PromptVariant("natural_language", "format", suffix="The decision is: ", low_mass_risk=True),
    PromptVariant("simplified", "format", suffix="Answer: ", low_mass_risk=True),
    PromptVariant("minimal", "format", suffix="I ", low_mass_risk=True),
    PromptVariant("numbers_only", "structure", drops_history=True),
    PromptVariant("preamble_reversed", "structure", swaps_label_order=True),
)
VARIANTS_VERSION = "v1"


def list_variants(cluster: str | None = None) -> list[PromptVariant]:
    if cluster is not None and cluster not in CLUSTERS:
        raise ValueError(f"unknown cluster {cluster!r}")
    return [v for v in _VARIANTS if cluster is None or v.cluster == cluster]


def get_variant(name: str | PromptVariant) -> PromptVariant:
    if isinstance(name, PromptVariant):
        return name
    for v in _VARIANTS:
        if v.name == name:
            return v
    raise PromptError(f"unknown prompt variant {name!r}")


def load_variant_overrides(raw: Mapping[str, Mapping[str, Any]]) -> dict[str, PromptVariant]:
    """Apply config overrides (field -> value per variant name) to the built-in table."""
    out = {v.name: v for v in _VARIANTS}
    for name, fields in raw.items():
        base = out.get(name) or PromptVariant(name, fields.get("cluster", "framing"))
        out[name] = replace(base, **dict(fields))
    return out


# -- chat templates --------------------------------------------------------

@dataclass(frozen=True)
class ChatTemplateSpec:
    system_open: str
    system_close: str
    user_open: str
    user_close: str
    assistant_open: str
    turn_separator: str = "\n"
    generation_prefix: str = ""

    FIELDS = ("system_open", "system_close", "user_open", "user_close",
              "assistant_open", "turn_separator", "generation_prefix")

    def markers(self) -> list[str]:
        """Marker substrings that must never appear verbatim inside a message body."""
        found: set[str] = set()
        for name in self.FIELDS:
            value = getattr(self, name)
            if value.strip():
                found.add(value.strip())
            found.update(re.findall(r"<[^<>\s]+>|\[/?[A-Z]+\]", value))
        return sorted(found, key=lambda m: (-len(m), m))

    @classmethod
    def from_dict(cls, raw: Mapping[str, Any]) -> "ChatTemplateSpec":
        if "base" in raw:
            merged = dict(builtin_templates()[raw["base"]].__dict__)
            merged.update({k: v for k, v in raw.items() if k in cls.FIELDS})
            raw = merged
        missing = [f for f in cls.FIELDS[:5] if f not in raw]
        if missing:
            raise PromptError(f"chat template missing field(s): {', '.join(missing)}")
        return cls(**{f: str(raw[f]) for f in cls.FIELDS if f in raw})


@lru_cache(maxsize=1)
def builtin_templates() -> dict[str, ChatTemplateSpec]:
    raw = json.loads(files("gamepredict.data").joinpath("chat_templates.v1.json").read_text(encoding="utf-8"))
    return {name: ChatTemplateSpec(**fields) for name, fields in raw["templates"].items()}


def load_chat_templates(directory: str | Path) -> dict[str, ChatTemplateSpec]:
    """Read every ``*.json`` template file; each lists the model ids it applies to."""
    out: dict[str, ChatTemplateSpec] = {}
    for path in sorted(Path(directory).glob("*.json")):
        raw = json.loads(path.read_text(encoding="utf-8"))
        spec = ChatTemplateSpec.from_dict(raw)
        for model_id in raw.get("models", []):
            if model_id in out:
                raise PromptError(f"{path.name}: model {model_id!r} already has a template")
            out[model_id] = spec
    return out


_ZWSP = "​"


def escape_markers(body: str, template: ChatTemplateSpec) -> str:
    """Break up template markers inside a message body with a zero-width space.

    Existing zero-width spaces are doubled first so distinct bodies stay distinct.
    """
    out = body.replace(_ZWSP, _ZWSP * 2)
    hit = False
    for marker in template.markers():
        if marker in out:
            hit = True
            out = out.replace(marker, marker[0] + _ZWSP + marker[1:])
    if hit:
        logger.info("escaped chat-template markers in message body")
    return out


def apply_chat_template(system: str, user_turns: Sequence[str], template: ChatTemplateSpec) -> str:
    parts = [template.system_open + escape_markers(system, template) + template.system_close]
    for turn in user_turns:
        parts.append(template.user_open + escape_markers(turn, template) + template.user_close)
    parts.append(template.assistant_open + template.generation_prefix)
    return template.turn_separator.join(parts)


# -- rendering -------------------------------------------------------------

@lru_cache(maxsize=1)
def _texts() -> dict[str, Any]:
    return json.loads(files("gamepredict.data").joinpath("system_messages.v1.json").read_text(encoding="utf-8"))


@dataclass(frozen=True)
class RenderedPrompt:
    text: str
    format: str
    variant: str
    decision_point_id: str
    expected_labels: tuple[str, ...]


def _num(x: float) -> str:
    return f"{x:g}"


def _yes_no(flag: bool) -> str:
    return "yes" if flag else "no"


def _payoff_lines(row, col, row_labels: Sequence[str], col_labels: Sequence[str]) -> list[str]:
    lines = []
    for i, r in enumerate(row_labels):
        for j, c in enumerate(col_labels):
            lines.append(f"- you choose {r}, the other player chooses {c}: "
                         f"you get {_num(row[i][j])}, the other player gets {_num(col[i][j])}")
    return lines


def _settings(dp: DecisionPoint) -> list[str]:
    cfg = dp.config
    if isinstance(cfg, BargainingConfig):
        return [
            f"- Amount to divide: {cfg.stakes}",
            f"- Information: {cfg.information}",
            f"- Messages allowed: {_yes_no(cfg.messages_allowed)}",
            f"- Alice's discount factor per round: {_num(cfg.delta1)}",
            f"- Bob's discount factor per round: {_num(cfg.delta2)}",
            f"- Maximum rounds: {'unlimited' if cfg.max_rounds is None else cfg.max_rounds}",
        ]
    if isinstance(cfg, PersuasionConfig):
        return [
            f"- Price: {cfg.price}",
            f"- Probability a product is high quality: {_num(cfg.quality_prob_p)}",
            f"- Value of a high-quality product: {_num(cfg.value_v)} times the price",
            f"- Seller knows the quality: {_yes_no(cfg.seller_knows_quality)}",
            f"- Buyer sees only the current round: {_yes_no(cfg.buyer_myopic)}",
            f"- Seller message type: {cfg.message_type}",
        ]
    if isinstance(cfg, NegotiationConfig):
        lines = [
            f"- Base price: {cfg.price}",
            f"- Information: {cfg.information}",
            f"- Messages allowed: {_yes_no(cfg.messages_allowed)}",
            f"- Maximum rounds: {cfg.max_rounds}",
        ]
        role = dp.role.lower()
        if cfg.information == "complete" or "seller" in role:
            lines.append(f"- Seller's valuation: {cfg.seller_value}")
        if cfg.information == "complete" or "buyer" in role:
            lines.append(f"- Buyer's valuation: {cfg.buyer_value}")
        return lines
    if isinstance(cfg, MatrixRepeatedConfig):
        labels = dp.decision_labels
        return [f"- Game: {cfg.game}", "Payoffs per round:"] + _payoff_lines(cfg.row_payoffs, cfg.col_payoffs, labels, labels)
    if isinstance(cfg, MatrixGame2x2):
        col_labels = cfg.extras.get("col_labels", ["X", "Y"])
        return ["Payoffs:"] + _payoff_lines(cfg.row_payoffs, cfg.col_payoffs, dp.decision_labels, col_labels)
    if isinstance(cfg, LotteryProblem):
        def describe(outcomes):
            return "; ".join(f"{m} with probability {_num(p * 100)}%" for m, p in outcomes)
        a, b = dp.decision_labels
        return [f"- Option {a}: {describe(cfg.option_a)}", f"- Option {b}: {describe(cfg.option_b)}"]
    raise PromptError(f"no renderer for config type {type(cfg).__name__}")


def _turn_line(turn) -> str:
    line = f"{turn.speaker}:"
    if turn.text:
        line += f" {turn.text}"
    if turn.structured_action is not None:
        line += " " + json.dumps(turn.structured_action, sort_keys=True)
    return line


def _numeric_line(turn) -> str | None:
    if not turn.structured_action:
        return None
    numeric = {k: v for k, v in turn.structured_action.items()
               if isinstance(v, (int, float)) and not isinstance(v, bool)}
    if not numeric:
        return None
    return f"{turn.speaker}: {json.dumps(numeric, sort_keys=True)}"


def ordered_labels(dp: DecisionPoint, variant: PromptVariant) -> tuple[str, ...]:
    if not variant.swaps_label_order:
        return dp.decision_labels
    rest = tuple(l for l in dp.decision_labels if l != dp.affirmative_label)
    return rest + (dp.affirmative_label,)


def render_parts(dp: DecisionPoint, variant: PromptVariant) -> tuple[str, str, tuple[str, ...]]:
    """(system message, user message body, label order) for a decision point."""
    texts = _texts()
    sections = texts["sections"]
    role = dp.role or texts["default_roles"][dp.family.value]
    system = texts["families"][dp.family.value].format(role=role)
    if variant.system_prefix:
        system = f"{variant.system_prefix} {system}"

    labels = ordered_labels(dp, variant)
    blocks = ["\n".join([sections["settings"], *_settings(dp)])]
    blocks.append(sections["options"].format(options=", ".join(f'"{l}"' for l in labels)))

    if not dp.family.aggregate_level:
        if variant.drops_history:
            numbers = [l for l in (_numeric_line(t) for t in dp.history) if l]
            if numbers:
                blocks.append("\n".join([sections["numbers"], *numbers]))
        else:
            lines = [_turn_line(t) for t in dp.history] or [sections["history_empty"]]
            blocks.append("\n".join([sections["history"], *lines]))
        blocks.append(sections["question"].format(round=dp.round_index, role=role))
    else:
        blocks.append(sections["question_aggregate"].format(role=role))
    return system, "\n\n".join(blocks), labels


def build_prompt(
    dp: DecisionPoint,
    variant: PromptVariant | str = "standard",
    format: str = "standard",
    template: ChatTemplateSpec | None = None,
    allow_any_variant: bool = False,
) -> RenderedPrompt:
    variant = get_variant(variant)
    if format not in FORMATS:
        raise PromptError(f"unknown format {format!r}")
    if format == "chat" and template is None:
        raise PromptError("chat format needs a chat template")
    if variant.name != "standard" and dp.family not in VARIANT_FAMILIES and not allow_any_variant:
        raise PromptError(f"variant {variant.name!r} is not enabled for family {dp.family.value!r}")

    system, user, labels = render_parts(dp, variant)
    if format == "standard":
        text = f"{system}\n\n{user}\n{variant.suffix}"
    else:
        text = apply_chat_template(system, [user], template) + variant.suffix
    return RenderedPrompt(text, format, variant.name, dp.id, labels)
