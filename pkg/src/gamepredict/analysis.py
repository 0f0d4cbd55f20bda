"""Pairwise base-vs-aligned comparison and every aggregation built on top of it."""

from __future__ import annotations

import logging
import math
import statistics
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Callable, Iterable, Mapping, Sequence

from .equilibrium import DegenerateGameError, closer_to_ne, mixed_ne_2x2, ne_alignment
from .filters import FilterConfig, FilterOutcome, PairStats, apply_filters, decide_winner
from .games import DecisionPoint, GameFamily, MatrixGame2x2, PairSpec
from .predictor import PredictionRecord, mean_decision_mass
from .stats import binomial_for_wins, bootstrap_median_ci, pearson, wilcoxon_signed_rank_one_sided

logger = logging.getLogger(__name__)

WILCOXON_MIN_N = 5
SHADED_REGION_R = 0.3


class CoverageError(ValueError):
    def __init__(self, missing: Mapping[str, Sequence[str]]):
        self.missing = {k: list(v) for k, v in missing.items() if v}
        detail = "; ".join(f"{side} missing {len(ids)}: {', '.join(ids[:10])}{' ...' if len(ids) > 10 else ''}"
                           for side, ids in self.missing.items())
        super().__init__(f"prediction coverage mismatch: {detail}")


@dataclass(frozen=True)
class FamilyPairResult:
    pair: PairSpec
    family: str
    base_r: float | None
    aligned_r: float | None
    base_mass: float
    aligned_mass: float
    filter: FilterOutcome
    winner: str | None  # "base" | "aligned" | "tie"; None when the pair is filtered out
    group: str = ""
    n_decisions: int = 0

    @property
    def diff(self) -> float | None:
        if self.base_r is None or self.aligned_r is None:
            return None
        return self.base_r - self.aligned_r

    def stats(self) -> PairStats:
        return PairStats(self.pair.pair_id, self.family, self.base_mass, self.aligned_mass, self.base_r, self.aligned_r)


def correlate(records: Mapping[str, PredictionRecord] | Sequence[PredictionRecord],
              dps: Sequence[DecisionPoint]) -> tuple[float | None, int]:
    """Pearson r between p_affirmative and the human target over decision points with a defined prediction."""
    by_id = records if isinstance(records, Mapping) else {r.decision_point_id: r for r in records}
    xs, ys = [], []
    for dp in dps:
        rec = by_id[dp.id]
        if rec.p_affirmative is None:
            continue
        xs.append(rec.p_affirmative)
        ys.append(dp.human_target)
    res = pearson(xs, ys)
    return res.r, res.n


def compare_pair(
    base_preds: Sequence[PredictionRecord] | Mapping[str, PredictionRecord],
    aligned_preds: Sequence[PredictionRecord] | Mapping[str, PredictionRecord],
    dps: Sequence[DecisionPoint],
    cfg: FilterConfig,
    pair: PairSpec | None = None,
    group: str = "",
) -> FamilyPairResult:
    if not dps:
        raise ValueError("compare_pair needs at least one decision point")
    families = {dp.family for dp in dps}
    if len(families) != 1:
        raise ValueError(f"decision points span several families: {sorted(f.value for f in families)}")
    family = families.pop()
    if pair is None:
        pair = PairSpec(0, "base", "aligned", "", 1.0)

    base = base_preds if isinstance(base_preds, Mapping) else {r.decision_point_id: r for r in base_preds}
    aligned = aligned_preds if isinstance(aligned_preds, Mapping) else {r.decision_point_id: r for r in aligned_preds}
    missing = {
        "base": [dp.id for dp in dps if dp.id not in base],
        "aligned": [dp.id for dp in dps if dp.id not in aligned],
    }
    if any(missing.values()):
        raise CoverageError(missing)

    base_sel = [base[dp.id] for dp in dps]
    aligned_sel = [aligned[dp.id] for dp in dps]
    base_mass = mean_decision_mass(base_sel)
    aligned_mass = mean_decision_mass(aligned_sel)
    base_r, _ = correlate(base, dps)
    aligned_r, _ = correlate(aligned, dps)
    outcome = apply_filters(pair.pair_id, family.value, base_mass, aligned_mass, base_r, aligned_r, cfg)
    winner = decide_winner(base_r, aligned_r) if outcome.included else None
    return FamilyPairResult(pair, family.value, base_r, aligned_r, base_mass, aligned_mass,
                            outcome, winner, group, len(dps))


# -- aggregation -----------------------------------------------------------

@dataclass(frozen=True)
class AggregateTable:
    key: str
    wins_base: int
    wins_aligned: int
    ties: int
    n_valid: int  # pairs passing both filters
    n_filtered: int  # pairs excluded by a filter
    binomial_p: float | None
    direction: str | None
    wilcoxon_p: float | None = None
    wilcoxon_direction: str | None = None

    @property
    def n_compared(self) -> int:
        return self.wins_base + self.wins_aligned


FAMILY_ORDER = [f.value for f in GameFamily]

GROUPERS: dict[str, Callable[[FamilyPairResult], str]] = {
    "family": lambda r: r.family,
    "group": lambda r: r.group,
    "provider": lambda r: r.pair.provider,
    "overall": lambda r: "overall",
    "family_group": lambda r: f"{r.family}:{r.group}",
}


def _canonical(results: Iterable[FamilyPairResult]) -> list[FamilyPairResult]:
    return sorted(results, key=lambda r: (r.pair.pair_id, FAMILY_ORDER.index(r.family) if r.family in FAMILY_ORDER else 99,
                                          r.family, r.group))


def summarize(key: str, results: Sequence[FamilyPairResult]) -> AggregateTable:
    included = [r for r in results if r.filter.included]
    wins_base = sum(1 for r in included if r.winner == "base")
    wins_aligned = sum(1 for r in included if r.winner == "aligned")
    ties = sum(1 for r in included if r.winner == "tie")
    test = binomial_for_wins(wins_base, wins_aligned)
    diffs = [r.diff for r in included if r.diff is not None and r.diff != 0.0]
    wp = wd = None
    if len(diffs) >= WILCOXON_MIN_N:
        w = wilcoxon_signed_rank_one_sided(diffs)
        wp, wd = w.p_value, w.direction
    return AggregateTable(
        key=key,
        wins_base=wins_base,
        wins_aligned=wins_aligned,
        ties=ties,
        n_valid=len(included),
        n_filtered=len(results) - len(included),
        binomial_p=None if test is None else test.p_value,
        direction=None if test is None else test.direction,
        wilcoxon_p=wp,
        wilcoxon_direction=wd,
    )


def aggregate(
    results: Iterable[FamilyPairResult],
    group_by: str | Callable[[FamilyPairResult], str] = "family",
    keys: Sequence[str] | None = None,
) -> list[AggregateTable]:
    """Win counts and tests per group.

    Groups appear in ``keys`` order when given (missing groups become zero rows),
    otherwise in order of first appearance after a canonical sort by pair id.
    """
    keyfn = GROUPERS[group_by] if isinstance(group_by, str) else group_by
    groups: dict[str, list[FamilyPairResult]] = defaultdict(list)
    order: list[str] = []
    for r in _canonical(results):
        k = keyfn(r)
        if k not in groups:
            order.append(k)
        groups[k].append(r)
    if keys is None:
        if group_by == "family":
            order.sort(key=lambda k: FAMILY_ORDER.index(k) if k in FAMILY_ORDER else len(FAMILY_ORDER))
        keys = order
    return [summarize(k, groups.get(k, [])) for k in keys]


# -- subsets ---------------------------------------------------------------

ROUND_PHASES = (("early (1-3)", 1, 3), ("mid (4-7)", 4, 7), ("late (8-10)", 8, 10))


def round_split(dps: Sequence[DecisionPoint], mode: str = "first_vs_later") -> dict[str, list[DecisionPoint]]:
    """Partition decision points by round.

    ``first_vs_later`` -> round 1 vs round >= 2; ``phases`` -> early/mid/late for 10-round games.
    """
    if any(dp.family.aggregate_level for dp in dps):
        raise ValueError("round splits apply only to decision-level families")
    if mode == "first_vs_later":
        return {
            "round=1": [dp for dp in dps if dp.round_index == 1],
            "round>=2": [dp for dp in dps if dp.round_index >= 2],
        }
    if mode == "phases":
        out = {label: [dp for dp in dps if lo <= dp.round_index <= hi] for label, lo, hi in ROUND_PHASES}
        late_label = ROUND_PHASES[-1][0]
        out[late_label] += [dp for dp in dps if dp.round_index > ROUND_PHASES[-1][2]]
        return out
    raise ValueError(f"unknown round split mode {mode!r}")


def _fmt(value) -> str:
    if isinstance(value, bool):
        return "yes" if value else "no"
    if value is None:
        return "unbounded"
    if isinstance(value, float):
        return f"{value:g}"
    return str(value)


CONFIG_PARAMETERS: dict[GameFamily, dict[str, Callable[[DecisionPoint], str]]] = {
    GameFamily.BARGAINING: {
        "stakes": lambda dp: str(dp.config.stakes),
        "information": lambda dp: dp.config.information,
        "messages_allowed": lambda dp: _fmt(dp.config.messages_allowed),
        "delta1": lambda dp: _fmt(dp.config.delta1),
        "delta2": lambda dp: _fmt(dp.config.delta2),
        "max_rounds": lambda dp: _fmt(dp.config.max_rounds),
    },
    GameFamily.PERSUASION: {
        "quality_prob_p": lambda dp: _fmt(dp.config.quality_prob_p),
        "value_v": lambda dp: _fmt(dp.config.value_v),
        "seller_knows_quality": lambda dp: _fmt(dp.config.seller_knows_quality),
        "buyer_myopic": lambda dp: _fmt(dp.config.buyer_myopic),
        "message_type": lambda dp: dp.config.message_type,
        "price": lambda dp: str(dp.config.price),
    },
    GameFamily.NEGOTIATION: {
        "information": lambda dp: dp.config.information,
        "messages_allowed": lambda dp: _fmt(dp.config.messages_allowed),
        "max_rounds": lambda dp: _fmt(dp.config.max_rounds),
        "price": lambda dp: str(dp.config.price),
        "value_asymmetry": lambda dp: dp.config.value_asymmetry,
    },
    GameFamily.MATRIX_REPEATED: {
        "game": lambda dp: dp.config.game,
    },
    GameFamily.MATRIX_ONESHOT: {
        "topology": lambda dp: dp.config.topology,
    },
}


def config_splits(dps: Sequence[DecisionPoint], parameter: str) -> dict[str, list[DecisionPoint]]:
    """Decision points grouped by one configuration parameter's value, in first-seen order."""
    if not dps:
        return {}
    family = dps[0].family
    try:
        getter = CONFIG_PARAMETERS[family][parameter]
    except KeyError:
        raise ValueError(f"{family.value} has no configuration parameter {parameter!r}") from None
    out: dict[str, list[DecisionPoint]] = {}
    for dp in dps:
        out.setdefault(getter(dp), []).append(dp)
    return out


# -- size bins -------------------------------------------------------------

@dataclass(frozen=True)
class SizeBinSummary:
    label: str
    lower: float
    upper: float
    n: int
    median: float
    ci_low: float
    ci_high: float


def _bin_label(lo: float, hi: float) -> str:
    if lo == 0.0:
        return f"<{hi:g}B"
    if math.isinf(hi):
        return f">={lo:g}B"
    return f"{lo:g}-{hi:g}B"


def size_bins(
    results: Sequence[FamilyPairResult],
    bins: Sequence[float] = (3.0, 14.0),
    resamples: int = 5000,
    seed: int = 0,
    level: float = 0.95,
    notices: list[str] | None = None,
) -> list[SizeBinSummary]:
    """Median (base_r - aligned_r) with a percentile-bootstrap CI per model-size bin.

    Bins are left-closed and right-open over parameter counts in billions; ``bins`` holds
    the inner edges. Only pairs passing the filters with both correlations defined count.
    """
    edges = [0.0, *sorted(bins), math.inf]
    out = []
    for i, (lo, hi) in enumerate(zip(edges[:-1], edges[1:])):
        diffs = [r.diff for r in results
                 if r.filter.included and r.diff is not None and lo <= r.pair.param_count < hi]
        label = _bin_label(lo, hi)
        if not diffs:
            msg = f"size bin {label} is empty; omitted"
            logger.info(msg)
            if notices is not None:
                notices.append(msg)
            continue
        ci_lo, ci_hi = bootstrap_median_ci(diffs, resamples=resamples, level=level, seed=seed + i)
        out.append(SizeBinSummary(label, lo, hi, len(diffs), float(statistics.median(diffs)), ci_lo, ci_hi))
    return out


# -- scatter ---------------------------------------------------------------

@dataclass(frozen=True)
class ScatterPoint:
    pair_id: int
    base_r: float | None
    aligned_r: float | None
    included: bool
    in_shaded_region: bool  # both correlations below the min-corr line

    @property
    def region(self) -> str:
        if self.base_r is None or self.aligned_r is None:
            return "undefined"
        if self.base_r > self.aligned_r:
            return "base_win"
        if self.aligned_r > self.base_r:
            return "aligned_win"
        return "diagonal"


def scatter_data(results: Sequence[FamilyPairResult], shaded_below: float = SHADED_REGION_R) -> dict[str, list[ScatterPoint]]:
    out: dict[str, list[ScatterPoint]] = defaultdict(list)
    for r in _canonical(results):
        shaded = all(x is None or x < shaded_below for x in (r.base_r, r.aligned_r))
        out[r.family].append(ScatterPoint(r.pair.pair_id, r.base_r, r.aligned_r, r.filter.included, shaded))
    return dict(out)


# -- equilibrium alignment -------------------------------------------------

@dataclass(frozen=True)
class NeAlignmentRow:
    pair_id: int
    base_r: float | None
    aligned_r: float | None
    closer: str | None


@dataclass
class NeSummary:
    human_vs_ne: float | None
    rows: list[NeAlignmentRow]
    closer_base: int
    closer_aligned: int
    ties: int
    binomial_p: float | None
    direction: str | None
    mean_base_r: float | None
    mean_aligned_r: float | None
    skipped_games: list[str] = field(default_factory=list)


def ne_vector(dps: Sequence[DecisionPoint], skipped: list[str] | None = None) -> dict[str, float]:
    """Row player's action-1 NE probability per one-shot game; degenerate games are skipped."""
    out = {}
    for dp in dps:
        if not isinstance(dp.config, MatrixGame2x2):
            raise ValueError(f"{dp.id} is not a one-shot 2x2 game")
        try:
            out[dp.id] = mixed_ne_2x2(dp.config).row_action1_prob
        except DegenerateGameError as exc:
            logger.warning("skipping %s: %s", dp.id, exc)
            if skipped is not None:
                skipped.append(dp.id)
    return out


def ne_summary(
    dps: Sequence[DecisionPoint],
    results: Sequence[FamilyPairResult],
    predictions: Mapping[str, Mapping[str, PredictionRecord]],
) -> NeSummary:
    """NE alignment of base vs aligned predictions over the pairs that pass the main filters.

    ``predictions`` maps model id -> {decision point id -> record} for the native formats.
    """
    skipped: list[str] = []
    ne = ne_vector(dps, skipped)
    games = [dp for dp in dps if dp.id in ne]
    human = pearson([dp.aggregate_choice_rate for dp in games], [ne[dp.id] for dp in games]).r

    def model_r(model_id: str) -> float | None:
        recs = predictions[model_id]
        keep = [dp for dp in games if recs[dp.id].p_affirmative is not None]
        return ne_alignment([recs[dp.id].p_affirmative for dp in keep], [ne[dp.id] for dp in keep]).r

    rows = []
    for r in _canonical(results):
        if not r.filter.included:
            continue
        br = model_r(r.pair.base_model_id)
        ar = model_r(r.pair.aligned_model_id)
        closer = closer_to_ne(br, ar) if br is not None and ar is not None else None
        rows.append(NeAlignmentRow(r.pair.pair_id, br, ar, closer))
    cb = sum(1 for x in rows if x.closer == "base")
    ca = sum(1 for x in rows if x.closer == "aligned")
    test = binomial_for_wins(cb, ca)
    base_rs = [x.base_r for x in rows if x.base_r is not None]
    al_rs = [x.aligned_r for x in rows if x.aligned_r is not None]
    return NeSummary(
        human_vs_ne=human,
        rows=rows,
        closer_base=cb,
        closer_aligned=ca,
        ties=sum(1 for x in rows if x.closer == "tie"),
        binomial_p=None if test is None else test.p_value,
        direction=None if test is None else test.direction,
        mean_base_r=math.fsum(base_rs) / len(base_rs) if base_rs else None,
        mean_aligned_r=math.fsum(al_rs) / len(al_rs) if al_rs else None,
        skipped_games=skipped,
    )
