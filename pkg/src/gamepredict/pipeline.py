"""Prediction runs and evaluation over a RunConfig.

Predictions live under ``<output_dir>/predictions/<family>/<variant>/<format>/<model>.jsonl``.
A base model rendered in chat format borrows its aligned partner's template, so that file name
also carries the template owner.
"""

from __future__ import annotations

import logging
import re
from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

from .analysis import (
    aggregate,
    CONFIG_PARAMETERS,
    FamilyPairResult,
    compare_pair,
    config_splits as split_by,
    ne_summary,
    round_split,
    scatter_data,
    size_bins,
)
from .config import RunConfig
from .filters import sensitivity_grid
from .games import DecisionPoint, GameFamily, PairSpec, load_dataset
from .logprobs import (
    DiskCache,
    HttpProvider,
    LogprobClient,
    MockProvider,
    Provider,
    ProviderError,
    default_alias_table,
    match_decision_tokens,
)
from .predictor import PredictionRecord, read_records, write_records
from .prompts import VARIANT_FAMILIES, build_prompt, get_variant

logger = logging.getLogger(__name__)

CORE_FAMILIES = (GameFamily.BARGAINING, GameFamily.PERSUASION, GameFamily.NEGOTIATION, GameFamily.MATRIX_REPEATED)
BOUNDARY_FAMILIES = (GameFamily.MATRIX_ONESHOT, GameFamily.LOTTERY)
POOLED_VARIANT_FAMILIES = (GameFamily.BARGAINING, GameFamily.NEGOTIATION)

# (base format, aligned format) per crossing
CROSSING_FORMATS = {
    "native": ("standard", "chat"),
    "both_plain": ("standard", "standard"),
    "both_chat": ("chat", "chat"),
}


class MissingDataError(RuntimeError):
    def __init__(self, gaps: Sequence[str]):
        self.gaps = list(gaps)
        shown = "\n  ".join(self.gaps[:20])
        more = f"\n  ... and {len(self.gaps) - 20} more" if len(self.gaps) > 20 else ""
        super().__init__(f"missing predictions ({len(self.gaps)}):\n  {shown}{more}")


class PredictFailure(RuntimeError):
    pass


def safe_name(model_id: str) -> str:
    return re.sub(r"[^A-Za-z0-9._-]", "_", model_id.replace("/", "__"))


def prediction_path(root: Path, family: GameFamily, variant: str, fmt: str, model_id: str,
                    template_owner: str | None = None) -> Path:
    name = safe_name(model_id)
    if fmt == "chat" and template_owner and template_owner != model_id:
        name += f".tmpl-{safe_name(template_owner)}"
    return root / "predictions" / family.value / variant / fmt / f"{name}.jsonl"


@dataclass(frozen=True)
class PredictJob:
    model_id: str
    format: str
    template_owner: str | None  # aligned model whose chat template is applied


def jobs_for(pairs: Sequence[PairSpec], crossing: str, models: Sequence[str] | None = None) -> list[PredictJob]:
    base_fmt, aligned_fmt = CROSSING_FORMATS[crossing]
    seen: dict[tuple, PredictJob] = {}
    for p in pairs:
        for model, fmt in ((p.base_model_id, base_fmt), (p.aligned_model_id, aligned_fmt)):
            if models and model not in models:
                continue
            owner = p.aligned_model_id if fmt == "chat" else None
            job = PredictJob(model, fmt, owner)
            seen.setdefault((job.model_id, job.format, job.template_owner), job)
    return list(seen.values())


def make_provider(cfg: RunConfig) -> Provider:
    ep = cfg.endpoint
    if ep.backend == "mock":
        return MockProvider(ep.mock_models)
    return HttpProvider(ep.url, ep.credential_env, ep.timeout, ep.max_attempts, ep.backoff)


def make_client(cfg: RunConfig, provider: Provider | None = None) -> LogprobClient:
    cache = DiskCache(cfg.cache_dir) if cfg.cache_dir is not None else None
    return LogprobClient(provider or make_provider(cfg), cache)


def load_family(cfg: RunConfig, family: GameFamily) -> list[DecisionPoint]:
    try:
        path = cfg.datasets[family]
    except KeyError:
        raise MissingDataError([f"no dataset configured for family {family.value}"]) from None
    if not path.exists():
        raise MissingDataError([f"dataset file not found: {path}"])
    return load_dataset(path, family)


@dataclass
class PredictSummary:
    records: int = 0
    failed: int = 0
    network_calls: int = 0
    failures: list[str] = field(default_factory=list)
    files: list[Path] = field(default_factory=list)


def run_predict(
    cfg: RunConfig,
    family: GameFamily | str,
    variant: str = "standard",
    crossing: str = "native",
    models: Sequence[str] | None = None,
    client: LogprobClient | None = None,
    progress: Callable[[str], None] | None = None,
) -> PredictSummary:
    """Fetch and persist one record per (model, decision point).

    Every model is probed before any batch starts so a backend without logprob support
    fails fast. Failed fetches are reported and skipped; rerunning picks them up while
    cached distributions are reused.
    """
    family = GameFamily(family)
    variant_spec = get_variant(variant)
    dps = load_family(cfg, family)
    client = client or make_client(cfg)
    templates = cfg.templates()
    jobs = jobs_for(cfg.pairs(), crossing, models)
    allow_any = cfg.allow_any_variant or family in VARIANT_FAMILIES

    for model in sorted({j.model_id for j in jobs}):
        client.provider.probe(model)

    aliases = {dp_labels: default_alias_table(dp_labels, cfg.aliases.get(family.value))
               for dp_labels in {dp.decision_labels for dp in dps}}
    summary = PredictSummary()
    calls_before = client.network_calls
    for job in jobs:
        template = None
        if job.format == "chat":
            template = templates.get(job.template_owner)
            if template is None:
                raise PredictFailure(f"no chat template for {job.template_owner!r}")
        prompts = {dp.id: build_prompt(dp, variant_spec, job.format, template, allow_any) for dp in dps}
        fetched = client.fetch_many({i: (job.model_id, p.text) for i, p in prompts.items()},
                                    cfg.top_k, cfg.concurrency)
        records = []
        for dp in dps:
            res = fetched[dp.id]
            if isinstance(res, ProviderError):
                summary.failed += 1
                summary.failures.append(f"{job.model_id} {dp.id}: {res}")
                continue
            masses = match_decision_tokens(res, dp.decision_labels, aliases[dp.decision_labels])
            records.append(PredictionRecord.build(dp.id, job.model_id, variant_spec.name, job.format,
                                                  masses, dp.affirmative_label))
        path = prediction_path(cfg.output_dir, family, variant_spec.name, job.format, job.model_id,
                               job.template_owner)
        write_records(records, path)
        summary.records += len(records)
        summary.files.append(path)
        if progress:
            progress(f"{family.value} {variant_spec.name} {job.format} {job.model_id}: "
                     f"{len(records)}/{len(dps)} records")
    summary.network_calls = client.network_calls - calls_before
    return summary


# -- evaluation ------------------------------------------------------------

class PredictionStore:
    """Lazy reader of persisted prediction files; records missing files as gaps."""

    def __init__(self, root: Path):
        self.root = root
        self._cache: dict[Path, dict[str, PredictionRecord]] = {}

    def get(self, family: GameFamily, variant: str, fmt: str, model_id: str,
            template_owner: str | None = None) -> dict[str, PredictionRecord] | None:
        path = prediction_path(self.root, family, variant, fmt, model_id, template_owner)
        if path not in self._cache:
            if not path.exists():
                return None
            self._cache[path] = {r.decision_point_id: r for r in read_records(path)}
        return self._cache[path]

    def has_any(self, family: GameFamily, variant: str, fmt: str) -> bool:
        return (self.root / "predictions" / family.value / variant / fmt).is_dir()


def pair_predictions(store: PredictionStore, pair: PairSpec, family: GameFamily, variant: str,
                     crossing: str, gaps: list[str]):
    base_fmt, aligned_fmt = CROSSING_FORMATS[crossing]
    out = []
    for model, fmt in ((pair.base_model_id, base_fmt), (pair.aligned_model_id, aligned_fmt)):
        owner = pair.aligned_model_id if fmt == "chat" else None
        recs = store.get(family, variant, fmt, model, owner)
        if recs is None:
            gaps.append(str(prediction_path(store.root, family, variant, fmt, model, owner)))
        out.append(recs)
    return out


def family_results(
    store: PredictionStore,
    pairs: Sequence[PairSpec],
    family: GameFamily,
    dps: Sequence[DecisionPoint],
    cfg: RunConfig,
    variant: str = "standard",
    crossing: str = "native",
    group: str = "",
) -> list[FamilyPairResult]:
    if not dps:
        return []
    gaps: list[str] = []
    loaded = [(p, *pair_predictions(store, p, family, variant, crossing, gaps)) for p in pairs]
    if gaps:
        raise MissingDataError(gaps)
    results = []
    for pair, base, aligned in loaded:
        missing = [dp.id for dp in dps if dp.id not in base or dp.id not in aligned]
        if missing:
            raise MissingDataError([f"pair {pair.pair_id} {family.value}: no prediction for {m}" for m in missing])
        results.append(compare_pair(base, aligned, dps, cfg.filters, pair, group))
    return results


@dataclass
class Evaluation:
    """Everything the report layer renders; all numbers derive from persisted records."""

    families: list[GameFamily]
    main: dict[GameFamily, list[FamilyPairResult]]
    crossings: dict[str, dict[GameFamily, list[FamilyPairResult]]]
    variants: dict[str, dict[GameFamily, list[FamilyPairResult]]]
    config_splits: dict[GameFamily, dict[str, dict[str, list[FamilyPairResult]]]]
    round_splits: dict[GameFamily, dict[str, dict[str, list[FamilyPairResult]]]]
    size_bins: dict[str, list]
    grids: dict[str, object]
    ne: object | None
    scatter: dict[str, list]
    notices: list[str]


def _split_results(store, pairs, family, groups: dict[str, list[DecisionPoint]], cfg) -> dict[str, list[FamilyPairResult]]:
    return {label: family_results(store, pairs, family, sub, cfg, group=label)
            for label, sub in groups.items() if sub}


def run_evaluate(cfg: RunConfig, families: Sequence[GameFamily | str] | None = None) -> Evaluation:
    fams = [GameFamily(f) for f in families] if families else [f for f in GameFamily if f in cfg.datasets]
    store = PredictionStore(cfg.output_dir)
    pairs = cfg.pairs()
    notices: list[str] = []
    dps_by_family = {f: load_family(cfg, f) for f in fams}

    main = {f: family_results(store, pairs, f, dps_by_family[f], cfg) for f in fams}

    crossings: dict[str, dict[GameFamily, list[FamilyPairResult]]] = {}
    for crossing in cfg.crossings:
        if crossing == "native":
            continue
        crossings[crossing] = {f: family_results(store, pairs, f, dps_by_family[f], cfg, crossing=crossing)
                               for f in fams}

    variants: dict[str, dict[GameFamily, list[FamilyPairResult]]] = {}
    for v in cfg.variants:
        if v == "standard":
            continue
        vf = [f for f in fams if f in VARIANT_FAMILIES or cfg.allow_any_variant]
        variants[v] = {f: family_results(store, pairs, f, dps_by_family[f], cfg, variant=v) for f in vf}

    cfg_splits: dict[GameFamily, dict[str, dict[str, list[FamilyPairResult]]]] = {}
    for f in fams:
        params = CONFIG_PARAMETERS.get(f, {})
        cfg_splits[f] = {p: _split_results(store, pairs, f, split_by(dps_by_family[f], p), cfg) for p in params}

    rounds: dict[GameFamily, dict[str, dict[str, list[FamilyPairResult]]]] = {}
    for f in fams:
        if f.aggregate_level:
            continue
        dps = dps_by_family[f]
        rounds[f] = {"first_vs_later": _split_results(store, pairs, f, round_split(dps), cfg)}
        if f is GameFamily.MATRIX_REPEATED:
            by_game: dict[str, list[DecisionPoint]] = defaultdict(list)
            for dp in dps:
                by_game[dp.config.game].append(dp)
            for game in sorted(by_game):
                rounds[f][f"phases:{game}"] = _split_results(store, pairs, f, round_split(by_game[game], "phases"), cfg)

    core = [r for f in fams if f in CORE_FAMILIES for r in main[f]]
    scopes = [(f.value, main[f]) for f in fams] + ([("overall", core)] if core else [])
    bins: dict[str, list] = {}
    for i, (scope, results) in enumerate(scopes):
        local: list[str] = []
        bins[scope] = size_bins(results, cfg.size_bins, cfg.bootstrap_resamples, cfg.seed + 1000 * i, notices=local)
        notices.extend(f"{scope}: {n}" for n in local)

    grids = {f.value: sensitivity_grid([r.stats() for r in main[f]], family=f.value) for f in fams}
    if core:
        grids["overall"] = sensitivity_grid([r.stats() for r in core], family="overall")

    ne = None
    if GameFamily.MATRIX_ONESHOT in fams:
        ne = ne_for(store, pairs, dps_by_family[GameFamily.MATRIX_ONESHOT], main[GameFamily.MATRIX_ONESHOT])
        if ne.skipped_games:
            notices.append(f"{len(ne.skipped_games)} degenerate one-shot game(s) skipped in NE alignment")

    scatter = scatter_data([r for f in fams for r in main[f]])
    return Evaluation(fams, main, crossings, variants, cfg_splits, rounds, bins, grids, ne, scatter, notices)


def ne_for(store: PredictionStore, pairs: Sequence[PairSpec], dps: Sequence[DecisionPoint],
           results: Sequence[FamilyPairResult]):
    preds = {}
    for pair in pairs:
        gaps: list[str] = []
        base, aligned = pair_predictions(store, pair, GameFamily.MATRIX_ONESHOT, "standard", "native", gaps)
        if gaps:
            raise MissingDataError(gaps)
        preds[pair.base_model_id] = base
        preds[pair.aligned_model_id] = aligned
    return ne_summary(dps, results, preds)


def core_overall(results_by_family: dict[GameFamily, list[FamilyPairResult]]):
    core = [r for f, rs in results_by_family.items() if f in CORE_FAMILIES for r in rs]
    return aggregate(core, "overall")[0] if core else None
