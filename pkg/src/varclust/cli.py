"""Command-line entry point: ``varclust run --preset iris`` and friends."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import List, Optional

from .experiment import PRESETS, ExperimentConfig, execute, preset, write_outputs

EXIT_OK = 0
EXIT_RUNTIME = 1
EXIT_USAGE = 2

DEFAULT_OUT = "varclust-out"


class ConfigError(Exception):
    pass


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="varclust", description="Variance-constrained distributed clustering.")
    sub = parser.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="run one distributed clustering experiment")
    source = run.add_mutually_exclusive_group(required=True)
    source.add_argument("--config", type=Path, help="JSON experiment configuration")
    source.add_argument("--preset", choices=sorted(PRESETS), help="built-in experiment")
    run.add_argument("--sites", type=int)
    run.add_argument("--local-k", type=int, nargs="+", metavar="K", help="one k for all sites, or one per site")
    run.add_argument("--algorithm", choices=["kmeans", "khm", "kharmonic"])
    run.add_argument("--seed", type=int)
    run.add_argument("--sigma-factor", type=float)
    run.add_argument("--border-fraction", type=float)
    run.add_argument("--constraint", choices=["normalized", "raw"])
    run.add_argument("--merging-site", type=int)
    run.add_argument("--baseline-k", type=int, help="k of the centralized baseline (0 disables it)")
    run.add_argument("--out", type=Path, help=f"output directory (default ./{DEFAULT_OUT})")
    run.add_argument("-v", "--verbose", action="store_true")
    return parser


def _load_raw(args) -> dict:
    if args.preset:
        return preset(args.preset)
    if not args.config.is_file():
        raise ConfigError(f"config file not found: {args.config}")
    try:
        raw = json.loads(args.config.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{args.config}: invalid JSON ({exc})") from None
    if not isinstance(raw, dict):
        raise ConfigError(f"{args.config}: top level must be an object")
    dataset = raw.get("dataset", {})
    if dataset.get("kind") == "csv" and "path" in dataset:
        path = Path(dataset["path"])
        if not path.is_absolute():
            dataset["path"] = str(args.config.parent / path)
        if not Path(dataset["path"]).is_file():
            raise ConfigError(f"data file not found: {dataset['path']}")
    return raw


def _site_list(raw: dict, sites: int) -> List[dict]:
    local = raw.get("local", {})
    if isinstance(local, dict):
        return [dict(local) for _ in range(sites)]
    local = [dict(entry) for entry in local]
    if len(local) == sites:
        return local
    if len(local) == 1 or all(entry == local[0] for entry in local):
        return [dict(local[0]) for _ in range(sites)]
    raise ConfigError(f"config lists {len(local)} distinct site configs; cannot resize to {sites}")


def apply_overrides(raw: dict, args) -> dict:
    raw = dict(raw)
    if args.seed is not None:
        raw["seed"] = args.seed
    if args.sites is not None:
        raw["local"] = _site_list(raw, args.sites)
        raw["sites"] = args.sites
    sites = int(raw.get("sites", 1))
    if args.local_k is not None or args.algorithm is not None:
        local = _site_list(raw, sites)
        if args.local_k is not None:
            if len(args.local_k) not in (1, sites):
                raise ConfigError(f"--local-k takes 1 or {sites} values, got {len(args.local_k)}")
            ks = args.local_k * sites if len(args.local_k) == 1 else args.local_k
            for entry, k in zip(local, ks):
                entry["k"] = k
        if args.algorithm is not None:
            for entry in local:
                entry["algorithm"] = args.algorithm
        raw["local"] = local
    merge = dict(raw.get("merge", {}))
    if args.sigma_factor is not None:
        merge["sigma_factor"] = args.sigma_factor
    if args.border_fraction is not None:
        merge["border_fraction"] = args.border_fraction
    if args.constraint is not None:
        merge["constraint_mode"] = args.constraint
    raw["merge"] = merge
    if args.merging_site is not None:
        raw["merging_site"] = args.merging_site
    if args.baseline_k is not None:
        if args.baseline_k == 0:
            raw["baseline"] = None
        else:
            baseline = dict(raw.get("baseline") or {"algorithm": "kmeans"})
            baseline["k"] = args.baseline_k
            raw["baseline"] = baseline
    if args.out is not None:
        raw["out"] = str(args.out)
    return raw


def _fmt(value) -> str:
    if value is None:
        return "-"
    if isinstance(value, float):
        return f"{value:.6g}"
    return str(value)


def summary_table(result) -> str:
    m = result.metrics
    ledger = result.ledger
    rows = [
        ("k_global", result.k_global),
        ("total SSE", m["total_sse"]),
        ("baseline SSE", m["centralized_baseline_sse"]),
        ("ARI vs truth", m["adjusted_rand_index"]),
        ("numbers sent", ledger.total_numbers_sent),
        ("model elements", ledger.model_elements),
        ("bytes (64-bit)", ledger.bytes_at_64bit),
        ("merges / moves", f"{len(result.trace.of_kind('merge'))} / {len(result.trace.of_kind('move'))}"),
    ]
    width = max(len(name) for name, _ in rows)
    return "\n".join(f"{name:<{width}}  {_fmt(value)}" for name, value in rows)


def cli_run(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")

    try:
        raw = apply_overrides(_load_raw(args), args)
        cfg = ExperimentConfig.from_dict(raw)
    except (ConfigError, ValueError, TypeError, KeyError) as exc:
        print(f"varclust: configuration error: {exc}", file=sys.stderr)
        return EXIT_USAGE

    try:
        X, result = execute(cfg)
        out = Path(cfg.out or DEFAULT_OUT)
        write_outputs(out, cfg, X, result)
    except FileNotFoundError as exc:
        print(f"varclust: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except Exception as exc:  # noqa: BLE001 - report and exit nonzero
        print(f"varclust: run failed: {exc}", file=sys.stderr)
        return EXIT_RUNTIME

    print(summary_table(result))
    print(f"outputs written to {out}")
    return EXIT_OK


def main() -> None:
    sys.exit(cli_run())


if __name__ == "__main__":
    main()
