"""Command-line entry point.

Exit codes: 0 success, 1 validation failure, 2 transport/capability failure, 3 missing data.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Sequence

from .analysis import CoverageError, ne_vector
from .config import CROSSINGS, ConfigError, RunConfig, load_config, parse_config
from .games import DatasetError, GameFamily
from .logprobs import ProviderError
from .pipeline import MissingDataError, PredictFailure, load_family, run_evaluate, run_predict
from .report import format_p, read_bundle_text, write_bundle, write_grids

EXIT_OK, EXIT_INVALID, EXIT_TRANSPORT, EXIT_MISSING = 0, 1, 2, 3
FAMILIES = [f.value for f in GameFamily]

log = logging.getLogger("gamepredict")


def _overrides(args: argparse.Namespace) -> dict:
    """Command-line flags that mirror RunConfig fields, as a patch over the raw config."""
    patch: dict = {}
    for flag, key in (("seed", "seed"), ("concurrency", "concurrency"), ("output_dir", "output_dir"),
                      ("cache_dir", "cache_dir"), ("top_k", "top_k"), ("bootstrap_resamples", "bootstrap_resamples")):
        value = getattr(args, flag, None)
        if value is not None:
            patch[key] = value
    endpoint = {k: getattr(args, k) for k in ("url", "credential_env") if getattr(args, k, None) is not None}
    if endpoint:
        patch["endpoint"] = endpoint
    filters = {}
    if getattr(args, "mass_threshold", None) is not None:
        filters["mass_threshold"] = None if args.mass_threshold < 0 else args.mass_threshold
    if getattr(args, "min_corr_threshold", None) is not None:
        filters["min_corr_threshold"] = None if args.min_corr_threshold < -1 else args.min_corr_threshold
    if filters:
        patch["filters"] = filters
    return patch


def _config(args: argparse.Namespace) -> RunConfig:
    cfg = load_config(args.config)
    patch = _overrides(args)
    if not patch:
        return cfg
    raw = json.loads(json.dumps(cfg.raw))
    for key, value in patch.items():
        if isinstance(value, dict):
            raw[key] = {**(raw.get(key) or {}), **value}
        elif key in ("output_dir", "cache_dir"):
            raw[key] = str(Path(value).resolve())
        else:
            raw[key] = value
    return parse_config(raw, cfg.source.parent if cfg.source else Path.cwd(), cfg.source)


def _families(cfg: RunConfig, names: Sequence[str] | None) -> list[GameFamily]:
    if names:
        return [GameFamily(n) for n in names]
    return [f for f in GameFamily if f in cfg.datasets]


def cmd_validate(args: argparse.Namespace) -> int:
    cfg = _config(args)
    issues = cfg.validate()
    for fam, path in cfg.datasets.items():
        if path.exists():
            try:
                load_family(cfg, fam)
            except DatasetError as exc:
                issues.append(f"datasets.{fam.value}: {exc}")
    for issue in issues:
        print(f"error: {issue}")
    if issues:
        print(f"{len(issues)} problem(s) found")
        return EXIT_INVALID
    print("config is valid")
    return EXIT_OK


def cmd_predict(args: argparse.Namespace) -> int:
    cfg = _config(args)
    families = _families(cfg, args.family)
    variants = args.variant or ["standard"]
    total_failed = 0
    for fam in families:
        for variant in variants:
            summary = run_predict(cfg, fam, variant, args.format, args.models, progress=print)
            print(f"{fam.value}/{variant}/{args.format}: {summary.records} records, "
                  f"{summary.failed} failed, {summary.network_calls} backend calls")
            for line in summary.failures[:20]:
                print(f"  failed: {line}")
            total_failed += summary.failed
    return EXIT_TRANSPORT if total_failed else EXIT_OK


def _bundle_dir(cfg: RunConfig) -> Path:
    return cfg.output_dir / "report"


def cmd_evaluate(args: argparse.Namespace) -> int:
    cfg = _config(args)
    ev = run_evaluate(cfg, _families(cfg, args.family))
    paths = write_bundle(ev, _bundle_dir(cfg), cfg.config_hash, cfg.seed)
    print(read_bundle_text(_bundle_dir(cfg), ["family_summary"]), end="")
    for note in ev.notices:
        print(f"note: {note}")
    print(f"wrote {len(paths)} files to {_bundle_dir(cfg)}")
    return EXIT_OK


def cmd_sensitivity(args: argparse.Namespace) -> int:
    cfg = _config(args)
    ev = run_evaluate(cfg, _families(cfg, args.family))
    out = _bundle_dir(cfg)
    write_grids(ev.grids, out, cfg.config_hash, cfg.seed)
    for grid in ev.grids.values():
        print((out / f"sensitivity_{grid.family}.txt").read_text(encoding="utf-8"))
    return EXIT_OK


def cmd_ne(args: argparse.Namespace) -> int:
    cfg = _config(args)
    dps = load_family(cfg, GameFamily.MATRIX_ONESHOT)
    skipped: list[str] = []
    ne = ne_vector(dps, skipped)
    out = cfg.output_dir / "ne_predictions.jsonl"
    out.parent.mkdir(parents=True, exist_ok=True)
    with out.open("w", encoding="utf-8") as fh:
        for dp in dps:
            if dp.id in ne:
                fh.write(json.dumps({"decision_point_id": dp.id, "topology": dp.config.topology,
                                     "row_action1_prob": ne[dp.id]}, sort_keys=True) + "\n")
    print(f"wrote equilibrium predictions for {len(ne)} games to {out}; skipped {len(skipped)} degenerate")
    if args.with_predictions:
        ev = run_evaluate(cfg, [GameFamily.MATRIX_ONESHOT])
        s = ev.ne
        fmt = lambda x: "-" if x is None else f"{x:.3f}"
        print(f"human vs NE r = {fmt(s.human_vs_ne)}; mean r base {fmt(s.mean_base_r)}, aligned {fmt(s.mean_aligned_r)}")
        print(f"closer to NE: base {s.closer_base}, aligned {s.closer_aligned}, ties {s.ties}; "
              f"p = {format_p(s.binomial_p)} ({s.direction or '-'})")
    return EXIT_OK


def cmd_report(args: argparse.Namespace) -> int:
    bundle = Path(args.bundle) if args.bundle else _bundle_dir(_config(args))
    if not (bundle / "manifest.json").exists():
        raise MissingDataError([f"no report bundle at {bundle}; run 'evaluate' first"])
    print(read_bundle_text(bundle, args.table), end="")
    return EXIT_OK


def cmd_demo(args: argparse.Namespace) -> int:
    from .synthetic import write_demo

    path = write_demo(args.dir, seed=args.seed)
    print(f"wrote synthetic workspace; config at {path}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="gamepredict", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def with_config(p: argparse.ArgumentParser, required: bool = True) -> argparse.ArgumentParser:
        p.add_argument("--config", "-c", required=required, help="run configuration (JSON)")
        p.add_argument("--seed", type=int)
        p.add_argument("--output-dir", dest="output_dir")
        p.add_argument("--cache-dir", dest="cache_dir")
        p.add_argument("--concurrency", type=int)
        return p

    def with_filters(p: argparse.ArgumentParser) -> None:
        p.add_argument("--mass-threshold", type=float, help="negative value disables the filter")
        p.add_argument("--min-corr-threshold", type=float, help="value below -1 disables the filter")
        p.add_argument("--bootstrap-resamples", type=int)
        p.add_argument("--family", action="append", choices=FAMILIES)

    p = with_config(sub.add_parser("validate", help="check config, datasets, registry and templates"))
    p.set_defaults(func=cmd_validate)

    p = with_config(sub.add_parser("predict", help="fetch logprobs and persist prediction records"))
    p.add_argument("--family", action="append", choices=FAMILIES)
    p.add_argument("--variant", action="append")
    p.add_argument("--format", default="native", choices=CROSSINGS,
                   help="native: base plain / aligned chat; both_plain; both_chat")
    p.add_argument("--models", nargs="+")
    p.add_argument("--url")
    p.add_argument("--credential-env", dest="credential_env", help="environment variable holding the API key")
    p.add_argument("--top-k", dest="top_k", type=int)
    p.set_defaults(func=cmd_predict)

    p = with_config(sub.add_parser("evaluate", help="compare pairs and write the report bundle"))
    with_filters(p)
    p.set_defaults(func=cmd_evaluate)

    p = with_config(sub.add_parser("sensitivity", help="threshold sensitivity grids"))
    with_filters(p)
    p.set_defaults(func=cmd_sensitivity)

    p = with_config(sub.add_parser("ne", help="equilibrium predictions for one-shot games"))
    p.add_argument("--with-predictions", action="store_true", help="also compare model NE alignment")
    p.set_defaults(func=cmd_ne)

    p = with_config(sub.add_parser("report", help="print the text tables of a written bundle"), required=False)
    p.add_argument("--bundle", help="bundle directory (default: <output_dir>/report)")
    p.add_argument("--table", action="append", help="only these tables")
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("demo", help="write a synthetic workspace that runs on the mock backend")
    p.add_argument("dir")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_demo)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    if args.command == "report" and not args.bundle and not args.config:
        parser.error("report needs --config or --bundle")
    try:
        return args.func(args)
    except (ConfigError, DatasetError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except (ProviderError, PredictFailure) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_TRANSPORT
    except (MissingDataError, CoverageError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_MISSING


if __name__ == "__main__":
    sys.exit(main())
