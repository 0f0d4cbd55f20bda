"""Small builders for decision points and prediction records used across tests."""

from __future__ import annotations

from gamepredict.games import (
    BargainingConfig,
    DecisionPoint,
    GameFamily,
    LotteryProblem,
    MatrixGame2x2,
    MatrixRepeatedConfig,
    Money,
    NegotiationConfig,
    PersuasionConfig,
    Turn,
)
from gamepredict.logprobs import LabelMass
from gamepredict.predictor import PredictionRecord

BARGAINING_RAW = {
    "stakes": 10000, "information": "complete", "messages_allowed": True,
    "delta1": 0.9, "delta2": 0.95, "max_rounds": 12,
}


def bargaining_dp(id="bg-1", choice="accept", round_index=2, **cfg) -> DecisionPoint:
    raw = {**BARGAINING_RAW, **cfg}
    return DecisionPoint(
        id, GameFamily.BARGAINING, BargainingConfig.from_dict(raw), round_index, "Bob",
        (Turn("Alice", "I propose a 60/40 split.", {"alice_gain": 6000, "bob_gain": 4000}),),
        ("accept", "reject"), "accept", choice,
    )


def persuasion_dp(id="ps-1", choice="yes") -> DecisionPoint:
    cfg = PersuasionConfig(0.5, 1.25, True, False, "text", Money.parse(100))
    return DecisionPoint(id, GameFamily.PERSUASION, cfg, 3, "",
                         (Turn("Seller", "This one is great."),), ("yes", "no"), "yes", choice)


def negotiation_dp(id="ng-1", choice="DealWithJohn", role="the buyer") -> DecisionPoint:
    cfg = NegotiationConfig(Money.parse(10000), "incomplete", False, 10, 1.2, 0.8)
    return DecisionPoint(id, GameFamily.NEGOTIATION, cfg, 2, role,
                         (Turn("Seller", "", {"price": 9500}),),
                         ("AcceptOffer", "RejectOffer", "DealWithJohn"), "AcceptOffer", choice)


def matrix_repeated_dp(id="mr-1", choice="defect", round_index=3) -> DecisionPoint:
    cfg = MatrixRepeatedConfig("pd", ((3, 0), (5, 1)), ((3, 5), (0, 1)))
    history = tuple(Turn(f"Round {k}", "", {"you": "cooperate", "other": "defect"}) for k in range(1, round_index))
    return DecisionPoint(id, GameFamily.MATRIX_REPEATED, cfg, round_index, "", history,
                         ("cooperate", "defect"), "cooperate", choice)


def oneshot_dp(id="os-1", row=((3, 0), (5, 1)), col=((3, 5), (0, 1)), rate=0.3, topology="dilemma") -> DecisionPoint:
    cfg = MatrixGame2x2(row, col, topology)
    return DecisionPoint(id, GameFamily.MATRIX_ONESHOT, cfg, 1, "", (), ("A", "B"), "A", None, rate, 100)


def lottery_dp(id="lt-1", rate=0.6) -> DecisionPoint:
    cfg = LotteryProblem(((Money.parse(100), 0.5), (Money.parse(0), 0.5)), ((Money.parse(45), 1.0),), rate, 50)
    return DecisionPoint(id, GameFamily.LOTTERY, cfg, 1, "", (), ("A", "B"), "A", None, rate, 50)


def record(dp_id: str, p: float | None, mass: float = 0.9, model="m", labels=("accept", "reject")) -> PredictionRecord:
    """Record with total decision mass ``mass`` split so that the first label gets share ``p``."""
    if p is None:
        per = {l: 0.0 for l in labels}
    else:
        per = {labels[0]: mass * p}
        for l in labels[1:]:
            per[l] = mass * (1 - p) / (len(labels) - 1)
    return PredictionRecord.build(dp_id, model, "standard", "standard", LabelMass.from_per_label(per), labels[0])


GOLDEN_DIR = __import__("pathlib").Path(__file__).parent / "golden"
GOLDEN_PAIR = {"base": "acme/base-7b", "aligned": "acme/chat-7b", "template": "llama3"}


def fixture_corpus() -> list[DecisionPoint]:
    """One decision point per family."""
    return [bargaining_dp(), persuasion_dp(), negotiation_dp(), matrix_repeated_dp(), oneshot_dp(), lottery_dp()]


def crossing_cells() -> dict[str, dict[str, str]]:
    """cell name -> {decision point id: prompt text} for the four model x format cells.

    Base models rendered in chat format use their aligned partner's template.
    """
    from gamepredict.prompts import build_prompt, builtin_templates

    tmpl = builtin_templates()[GOLDEN_PAIR["template"]]
    cells = {
        "base_plain": ("standard", None),
        "aligned_plain": ("standard", None),
        "base_chat_partner_template": ("chat", tmpl),
        "aligned_chat": ("chat", tmpl),
    }
    return {name: {dp.id: build_prompt(dp, "standard", fmt, t).text for dp in fixture_corpus()}
            for name, (fmt, t) in cells.items()}


def golden_mismatches(update: bool = False) -> list[str]:
    """Compare rendered cells with the stored golden files; rewrite them when ``update``."""
    bad = []
    for cell, prompts in crossing_cells().items():
        for dp_id, text in prompts.items():
            path = GOLDEN_DIR / cell / f"{dp_id}.txt"
            if update:
                path.parent.mkdir(parents=True, exist_ok=True)
                path.write_text(text, encoding="utf-8", newline="")
            elif not path.exists() or path.read_text(encoding="utf-8") != text:
                bad.append(f"{cell}/{dp_id}")
    return bad


HEADLINE_COUNTS = {"bargaining": (75, 4), "persuasion": (32, 4), "negotiation": (25, 1), "matrix_repeated": (81, 13)}


def pair_result(pair_id: int, family: str, base_r, aligned_r, mass=(0.9, 0.9), param_count=7.0, provider="acme"):
    """A FamilyPairResult whose filter outcome and winner follow the default rules."""
    from gamepredict.analysis import FamilyPairResult
    from gamepredict.filters import FilterConfig, apply_filters, decide_winner
    from gamepredict.games import PairSpec

    pair = PairSpec(pair_id, f"{provider}/base-{pair_id}", f"{provider}/chat-{pair_id}", provider, param_count)
    outcome = apply_filters(pair_id, family, mass[0], mass[1], base_r, aligned_r, FilterConfig())
    winner = decide_winner(base_r, aligned_r) if outcome.included else None
    return FamilyPairResult(pair, family, base_r, aligned_r, mass[0], mass[1], outcome, winner)


def results_from_counts(counts: dict[str, tuple[int, int]], filtered_per_family: int = 0):
    """Pair results reproducing the given (base wins, aligned wins) per family, plus filtered-out pairs."""
    out = []
    pid = 0
    for family, (wb, wa) in counts.items():
        for i in range(wb + wa):
            pid += 1
            hi, lo = 0.55 + 0.001 * i, 0.35
            out.append(pair_result(pid, family, *((hi, lo) if i < wb else (lo, hi))))
        for _ in range(filtered_per_family):
            pid += 1
            out.append(pair_result(pid, family, 0.9, 0.1, mass=(0.5, 0.95)))
    return out
