"""Synthetic corpora with known generating probabilities, plus a self-contained mock workspace.

Each decision point gets a latent cue z in [-1, 1]; the generating probability of the
affirmative choice is sigmoid(slope * z). Decision-level humans draw one choice from it,
aggregate-level records draw a choice rate from a binomial sample of participants.
"""

from __future__ import annotations

import json
import math
from pathlib import Path

import numpy as np

from .games import (
    TOPOLOGIES,
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
    dump_dataset,
)
from .logprobs import prompt_hash
from .prompts import ChatTemplateSpec, build_prompt, builtin_templates

DEFAULT_SIZES = {
    GameFamily.BARGAINING: 100,
    GameFamily.PERSUASION: 100,
    GameFamily.NEGOTIATION: 100,
    GameFamily.MATRIX_REPEATED: 100,
    GameFamily.MATRIX_ONESHOT: 50,
    GameFamily.LOTTERY: 50,
}

PD = (((3, 0), (5, 1)), ((3, 5), (0, 1)))
BOS = (((10, 0), (0, 7)), ((7, 0), (0, 10)))


def _sigmoid(x: float) -> float:
    return 1.0 / (1.0 + math.exp(-x))


def _cents(rng: np.random.Generator, lo: float, hi: float) -> Money:
    return Money(int(rng.integers(round(lo * 100), round(hi * 100))))


def _decision(rng, p: float, labels: tuple[str, ...]) -> str:
    if rng.random() < p:
        return labels[0]
    rest = labels[1:]
    return rest[int(rng.integers(len(rest)))]


def _bargaining(rng, i: int, z: float, p: float) -> DecisionPoint:
    stakes = _cents(rng, 100, 10000)
    cfg = BargainingConfig(stakes, str(rng.choice(["complete", "incomplete"])), bool(rng.integers(2)),
                           float(rng.choice([0.8, 0.9, 0.95, 1.0])), float(rng.choice([0.8, 0.9, 0.95, 1.0])),
                           int(rng.choice([3, 5, 10])))
    rnd = int(rng.integers(1, 4))
    share = (z + 1) / 2
    offer = {"alice_gain": round(stakes.minor * (1 - share)) / 100, "bob_gain": round(stakes.minor * share) / 100,
             "offer_share": round(share, 6)}
    labels = ("accept", "reject")
    return DecisionPoint(f"bg-{i:04d}", GameFamily.BARGAINING, cfg, rnd, "Bob",
                         (Turn("Alice", "Here is my proposal.", offer),), labels, "accept",
                         _decision(rng, p, labels))


def _persuasion(rng, i: int, z: float, p: float) -> DecisionPoint:
    cfg = PersuasionConfig(float(rng.choice([0.3, 0.5, 0.8])), float(rng.choice([1.2, 1.25, 2.0, 3.0])),
                           bool(rng.integers(2)), bool(rng.integers(2)), str(rng.choice(["text", "binary"])),
                           _cents(rng, 10, 1000))
    signal = {"claimed_quality_score": round(z, 6)}
    labels = ("yes", "no")
    return DecisionPoint(f"ps-{i:04d}", GameFamily.PERSUASION, cfg, int(rng.integers(1, 11)), "",
                         (Turn("Seller", "This product is worth it.", signal),), labels, "yes",
                         _decision(rng, p, labels))


def _negotiation(rng, i: int, z: float, p: float) -> DecisionPoint:
    price = _cents(rng, 1000, 100000)
    cfg = NegotiationConfig(price, str(rng.choice(["complete", "incomplete"])), bool(rng.integers(2)),
                            int(rng.choice([1, 10, 30])), float(rng.choice([0.8, 1.0, 1.2, 1.5])),
                            float(rng.choice([0.8, 1.0, 1.2, 1.5])))
    proposal = {"price": round(price.minor * (1 - 0.3 * z)) / 100, "discount": round(z, 6)}
    labels = ("AcceptOffer", "RejectOffer", "DealWithJohn")
    return DecisionPoint(f"ng-{i:04d}", GameFamily.NEGOTIATION, cfg, int(rng.integers(1, 4)), "the buyer",
                         (Turn("Seller", "My offer stands.", proposal),), labels, "AcceptOffer",
                         _decision(rng, p, labels))


def _matrix_repeated(rng, i: int, z: float, p: float) -> DecisionPoint:
    game = "pd" if i % 2 == 0 else "bos"
    row, col = PD if game == "pd" else BOS
    cfg = MatrixRepeatedConfig(game, row, col)
    rnd = int(rng.integers(1, 11))
    history = (Turn("Other player", "Let's see how this goes.", {"trust_signal": round(z, 6)}),)
    history += tuple(Turn(f"Round {k}", "", {"you": "cooperate" if rng.random() < 0.5 else "defect"})
                     for k in range(1, rnd))
    labels = ("cooperate", "defect")
    return DecisionPoint(f"mr-{i:04d}", GameFamily.MATRIX_REPEATED, cfg, rnd, "", history, labels,
                         "cooperate", _decision(rng, p, labels))


def _oneshot(rng, i: int, z: float, p: float, n_participants: int) -> DecisionPoint:
    def payoffs():
        return tuple(tuple(float(rng.integers(0, 100)) / 10 for _ in range(2)) for _ in range(2))
    cfg = MatrixGame2x2(payoffs(), payoffs(), TOPOLOGIES[i % len(TOPOLOGIES)], bool(i % 2),
                        {"latent_cue": round(z, 6)})
    rate = float(rng.binomial(n_participants, p)) / n_participants
    return DecisionPoint(f"os-{i:04d}", GameFamily.MATRIX_ONESHOT, cfg, 1, "", (), ("A", "B"), "A", None,
                         rate, n_participants)


def _lottery(rng, i: int, z: float, p: float, n_participants: int) -> DecisionPoint:
    win = _cents(rng, 10, 1000)
    q = round(float(rng.uniform(0.05, 0.95)), 2)
    sure = Money(max(1, round(win.minor * q * (1 + 0.5 * z))))
    rate = float(rng.binomial(n_participants, p)) / n_participants
    cfg = LotteryProblem(((win, q), (Money(0), round(1 - q, 2))), ((sure, 1.0),), rate, n_participants)
    return DecisionPoint(f"lt-{i:04d}", GameFamily.LOTTERY, cfg, 1, "", (), ("A", "B"), "A", None,
                         rate, n_participants)


def synthetic_corpus(
    sizes: dict[GameFamily, int] | None = None,
    seed: int = 0,
    slope: float = 8.0,
    n_participants: int = 40,
) -> tuple[dict[GameFamily, list[DecisionPoint]], dict[str, float]]:
    """Return ``(decision points by family, generating probability by decision point id)``."""
    sizes = dict(DEFAULT_SIZES if sizes is None else sizes)
    corpus: dict[GameFamily, list[DecisionPoint]] = {}
    truth: dict[str, float] = {}
    for fam_index, (family, n) in enumerate(sizes.items()):
        rng = np.random.default_rng(np.random.Philox(seed * 1000 + fam_index))
        points = []
        for i in range(n):
            z = float(rng.uniform(-1, 1))
            p = _sigmoid(slope * z)
            if family is GameFamily.BARGAINING:
                dp = _bargaining(rng, i, z, p)
            elif family is GameFamily.PERSUASION:
                dp = _persuasion(rng, i, z, p)
            elif family is GameFamily.NEGOTIATION:
                dp = _negotiation(rng, i, z, p)
            elif family is GameFamily.MATRIX_REPEATED:
                dp = _matrix_repeated(rng, i, z, p)
            elif family is GameFamily.MATRIX_ONESHOT:
                dp = _oneshot(rng, i, z, p, n_participants)
            else:
                dp = _lottery(rng, i, z, p, n_participants)
            points.append(dp)
            truth[dp.id] = p
        corpus[family] = points
    return corpus, truth


def truth_table(points: list[DecisionPoint], truth: dict[str, float], fmt: str = "standard",
                template: ChatTemplateSpec | None = None, variant: str = "standard") -> dict[str, float]:
    """Prompt-hash -> generating probability, for a ``table`` mock that replays the truth."""
    out: dict[str, float] = {}
    for dp in points:
        h = prompt_hash(build_prompt(dp, variant, fmt, template, allow_any_variant=True).text)
        if h in out and out[h] != truth[dp.id]:
            raise ValueError(f"two decision points render to the same prompt ({dp.id})")
        out[h] = truth[dp.id]
    return out


DEMO_PAIRS = [
    # pair 1: base replays the truth, aligned is noise; pair 2 is the reverse
    {"pair_id": 1, "base_model_id": "synth/truth-base", "aligned_model_id": "synth/noise-chat",
     "provider": "synth", "param_count": 2.0},
    {"pair_id": 2, "base_model_id": "synth/noise-base", "aligned_model_id": "synth/truth-chat",
     "provider": "synth", "param_count": 20.0},
]


def write_demo(root: str | Path, seed: int = 0, sizes: dict[GameFamily, int] | None = None,
               template_name: str = "chatml") -> Path:
    """Write datasets, registry, templates, mock tables and a config; return the config path."""
    root = Path(root)
    corpus, truth = synthetic_corpus(sizes, seed)
    template = builtin_templates()[template_name]
    datasets = {}
    table_std: dict[str, float] = {}
    table_chat: dict[str, float] = {}
    for family, points in corpus.items():
        path = root / "data" / f"{family.value}.jsonl"
        dump_dataset(points, path, family)
        datasets[family.value] = f"data/{family.value}.jsonl"
        table_std.update(truth_table(points, truth, "standard"))
        table_chat.update(truth_table(points, truth, "chat", template))

    def dump(rel: str, obj) -> None:
        p = root / rel
        p.parent.mkdir(parents=True, exist_ok=True)
        p.write_text(json.dumps(obj, indent=1, sort_keys=True) + "\n", encoding="utf-8")

    dump("registry.json", {"version": 1, "pairs": DEMO_PAIRS})
    dump("templates/synth.json", {"base": template_name, "models": ["synth/noise-chat", "synth/truth-chat"]})
    dump("mocks/truth-standard.json", table_std)
    dump("mocks/truth-chat.json", table_chat)
    config = {
        "datasets": datasets,
        "registry": "registry.json",
        "templates": "templates",
        "endpoint": {
            "backend": "mock",
            "mock_models": {
                "synth/truth-base": {"kind": "table", "table_file": "mocks/truth-standard.json", "mass": 0.95},
                "synth/truth-chat": {"kind": "table", "table_file": "mocks/truth-chat.json", "mass": 0.95},
                "synth/noise-base": {"kind": "noise", "mass": 0.95},
                "synth/noise-chat": {"kind": "noise", "mass": 0.95},
            },
        },
        "filters": {"mass_threshold": 0.8, "min_corr_threshold": 0.3},
        "variants": ["standard"],
        "crossings": ["native"],
        "seed": seed,
        "bootstrap_resamples": 2000,
        "output_dir": "out",
        "cache_dir": "cache",
        "concurrency": 4,
    }
    dump("config.json", config)
    return root / "config.json"
