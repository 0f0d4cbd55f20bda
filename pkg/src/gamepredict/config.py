"""Run configuration: a JSON file whose relative paths resolve against its own directory."""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from .filters import FilterConfig
from .games import GameFamily, PairSpec, builtin_registry, load_registry
from .logprobs import DEFAULT_TOP_K, MockBehavior
from .prompts import ChatTemplateSpec, get_variant, load_chat_templates

LOCATION_KEYS = frozenset({"output_dir", "cache_dir", "concurrency"})
CROSSINGS = ("native", "both_plain", "both_chat")


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class Issue:
    location: str
    message: str

    def __str__(self) -> str:
        return f"{self.location}: {self.message}"


@dataclass
class EndpointConfig:
    backend: str = "http"  # "http" | "mock"
    url: str | None = None
    credential_env: str | None = None
    timeout: float = 60.0
    max_attempts: int = 4
    backoff: float = 1.0
    mock_models: dict[str, MockBehavior] = field(default_factory=dict)


@dataclass
class RunConfig:
    source: Path | None
    raw: dict[str, Any]
    datasets: dict[GameFamily, Path]
    registry_path: Path | None
    template_dir: Path | None
    endpoint: EndpointConfig
    filters: FilterConfig
    variants: list[str]
    crossings: list[str]
    seed: int
    bootstrap_resamples: int
    size_bins: list[float]
    output_dir: Path
    cache_dir: Path | None
    concurrency: int
    top_k: int
    aliases: dict[str, dict[str, list[str]]]
    allow_any_variant: bool = False

    @property
    def config_hash(self) -> str:
        """Hash of the settings that can change results; output/cache locations and concurrency are left out."""
        relevant = {k: v for k, v in self.raw.items() if k not in LOCATION_KEYS}
        canonical = json.dumps(relevant, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()[:16]

    def pairs(self) -> list[PairSpec]:
        if self.registry_path is None:
            return builtin_registry()
        return load_registry(self.registry_path)

    def templates(self) -> dict[str, ChatTemplateSpec]:
        if self.template_dir is None:
            return {}
        return load_chat_templates(self.template_dir)

    def validate(self) -> list[Issue]:
        issues: list[Issue] = []
        for fam, path in self.datasets.items():
            if not path.exists():
                issues.append(Issue(f"datasets.{fam.value}", f"file not found: {path}"))
        pairs: list[PairSpec] = []
        try:
            pairs = self.pairs()
        except (OSError, ValueError, KeyError) as exc:
            issues.append(Issue("registry", str(exc)))
        templates: dict[str, ChatTemplateSpec] = {}
        if self.template_dir is not None and not self.template_dir.is_dir():
            issues.append(Issue("templates", f"directory not found: {self.template_dir}"))
        else:
            try:
                templates = self.templates()
            except (OSError, ValueError) as exc:
                issues.append(Issue("templates", str(exc)))
        needs_chat = any(c in ("native", "both_chat") for c in self.crossings)
        if needs_chat:
            for p in pairs:
                if p.aligned_model_id not in templates:
                    issues.append(Issue(f"registry.pair {p.pair_id}",
                                        f"no chat template for aligned model {p.aligned_model_id!r}"))
        if self.endpoint.backend == "http" and not self.endpoint.url:
            issues.append(Issue("endpoint.url", "http backend needs a url"))
        if self.endpoint.backend == "mock":
            for p in pairs:
                for m in (p.base_model_id, p.aligned_model_id):
                    if m not in self.endpoint.mock_models and m != "always-accept":
                        issues.append(Issue("endpoint.mock_models", f"no mock behaviour for model {m!r}"))
        if self.concurrency < 1:
            issues.append(Issue("concurrency", "must be >= 1"))
        if self.top_k < 1:
            issues.append(Issue("top_k", "must be >= 1"))
        return issues


def _path(base: Path, value: str | None) -> Path | None:
    if value is None:
        return None
    p = Path(value)
    return p if p.is_absolute() else (base / p)


def _mock_behavior(raw: dict[str, Any], base: Path) -> MockBehavior:
    raw = dict(raw)
    table_file = raw.pop("table_file", None)
    if table_file is not None:
        raw["table"] = json.loads(_path(base, table_file).read_text(encoding="utf-8"))
    return MockBehavior.from_dict(raw)


TOP_LEVEL_KEYS = frozenset({
    "datasets", "registry", "templates", "endpoint", "filters", "variants", "crossings", "seed",
    "bootstrap_resamples", "size_bins", "output_dir", "cache_dir", "concurrency", "top_k", "aliases",
    "allow_any_variant",
})
FILTER_KEYS = frozenset({"mass_threshold", "min_corr_threshold"})


def parse_config(raw: dict[str, Any], base_dir: Path, source: Path | None = None) -> RunConfig:
    unknown = sorted(set(raw) - TOP_LEVEL_KEYS)
    if unknown:
        raise ConfigError(f"unknown config key(s): {', '.join(unknown)}")
    unknown = sorted(set(raw.get("filters") or {}) - FILTER_KEYS)
    if unknown:
        raise ConfigError(f"filters: unknown key(s): {', '.join(unknown)}")
    try:
        datasets = {GameFamily(k): _path(base_dir, v) for k, v in (raw.get("datasets") or {}).items()}
    except ValueError as exc:
        raise ConfigError(f"datasets: {exc}") from exc
    ep_raw = dict(raw.get("endpoint") or {})
    try:
        mocks = {m: _mock_behavior(b, base_dir) for m, b in (ep_raw.pop("mock_models", None) or {}).items()}
        endpoint = EndpointConfig(mock_models=mocks, **ep_raw)
    except (TypeError, ValueError, OSError) as exc:
        raise ConfigError(f"endpoint: {exc}") from exc
    if endpoint.backend not in ("http", "mock"):
        raise ConfigError(f"endpoint.backend must be 'http' or 'mock', got {endpoint.backend!r}")
    f_raw = raw.get("filters") or {}
    try:
        filters = FilterConfig(f_raw.get("mass_threshold", 0.8), f_raw.get("min_corr_threshold", 0.3))
    except ValueError as exc:
        raise ConfigError(f"filters: {exc}") from exc
    variants = list(raw.get("variants") or ["standard"])
    for v in variants:
        try:
            get_variant(v)
        except ValueError as exc:
            raise ConfigError(f"variants: {exc}") from exc
    crossings = list(raw.get("crossings") or ["native"])
    bad = [c for c in crossings if c not in CROSSINGS]
    if bad:
        raise ConfigError(f"crossings: unknown value(s) {bad}; choose from {list(CROSSINGS)}")
    return RunConfig(
        source=source,
        raw=raw,
        datasets=datasets,
        registry_path=_path(base_dir, raw.get("registry")),
        template_dir=_path(base_dir, raw.get("templates")),
        endpoint=endpoint,
        filters=filters,
        variants=variants,
        crossings=crossings,
        seed=int(raw.get("seed", 0)),
        bootstrap_resamples=int(raw.get("bootstrap_resamples", 5000)),
        size_bins=[float(x) for x in raw.get("size_bins", [3, 14])],
        output_dir=_path(base_dir, raw.get("output_dir", "out")),
        cache_dir=_path(base_dir, raw.get("cache_dir")),
        concurrency=int(raw.get("concurrency", 4)),
        top_k=int(raw.get("top_k", DEFAULT_TOP_K)),
        aliases={k: dict(v) for k, v in (raw.get("aliases") or {}).items()},
        allow_any_variant=bool(raw.get("allow_any_variant", False)),
    )


def load_config(path: str | Path) -> RunConfig:
    path = Path(path)
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON at line {exc.lineno}: {exc.msg}") from exc
    if not isinstance(raw, dict):
        raise ConfigError(f"{path}: top level must be an object")
    return parse_config(raw, path.parent, path)
