"""Command line entry point: ``frachardy <command> --config cfg.json --out dir``.

Exit codes: 0 success, 1 trend unverified (only with ``--strict-trends``),
2 usage or validation error, 3 invariant violated.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .capacity import solve_capacity
from .energy import EXTERIOR, EnergyForm, seminorm_p, seminorm_zero_extended_p, weight_field
from .experiments import (DIAGNOSTICS, INVARIANT, OK, TREND_UNVERIFIED, USAGE, ExperimentConfig,
                          build_compacta, build_probes, bundled_config, convergence_study, dumps,
                          run, write_csv)
from .geometry import DomainError, build_domain, domain_to_json, parse_h
from .whitney import whitney_decompose

log = logging.getLogger("frachardy")


def _load(args) -> ExperimentConfig:
    if args.config is None:
        raise ValueError("--config is required")
    path = Path(args.config)
    cfg = ExperimentConfig.load(path) if path.exists() else bundled_config(args.config)
    if args.seed is not None:
        cfg.seed = args.seed
    return cfg


def _first_domain(cfg, args):
    h = parse_h(args.h) if getattr(args, "h", None) else cfg.ladder[0]
    return build_domain(cfg.domain, h)


def _outdir(cfg, args) -> Path:
    out = Path(args.out or cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_domain(args):
    cfg = _load(args)
    domain = _first_domain(cfg, args)
    path = _outdir(cfg, args) / "domain.json"
    path.write_text(dumps(domain_to_json(domain)))
    log.info("wrote %s (%d cells)", path, domain.size)
    return OK


def cmd_whitney(args):
    cfg = _load(args)
    domain = _first_domain(cfg, args)
    W = whitney_decompose(domain)
    out = _outdir(cfg, args)
    (out / "whitney.json").write_text(dumps(W.to_json()))
    check = W.check()
    log.info("%d cubes, overlap %d, valid %s", len(W), W.overlap, check["ok"])
    return OK if check["ok"] else INVARIANT


def cmd_energy(args):
    cfg = _load(args)
    domain = _first_domain(cfg, args)
    W = whitney_decompose(domain)
    form = EnergyForm(cfg.params, domain)
    probes = build_probes(cfg.probes or {"kind": "smooth"}, domain, W, cfg.seed)
    omega = weight_field(domain, cfg.params, EXTERIOR)
    docs = []
    for u in probes:
        lo, hi = seminorm_zero_extended_p(u, form, omega)
        docs.append({"value": seminorm_p(u, form), "bracket": None, "p": cfg.params.p,
                     "s": cfg.params.s, "zero_extended": {"value": 0.5 * (lo + hi),
                                                          "bracket": [lo, hi]}})
    (_outdir(cfg, args) / "energy.json").write_text(dumps(docs))
    return OK


def cmd_capacity(args):
    cfg = _load(args)
    domain = _first_domain(cfg, args)
    W = whitney_decompose(domain)
    form = EnergyForm(cfg.params, domain)
    _, family = build_compacta(cfg.compacta or {"kind": "concentric"}, domain, W)
    out = _outdir(cfg, args)
    docs = []
    for i, K in enumerate(family):
        res = solve_capacity(K, form, cfg.solver)
        ref = f"witness_{i}.json"
        (out / ref).write_text(dumps(res.witness.to_json()))
        docs.append({"K": K.label, **res.to_json(witness_ref=ref)})
    (out / "capacity.json").write_text(dumps(docs))
    return OK


def cmd_report(args):
    cfg = _load(args)
    if args.diagnostic != "all":
        cfg.diagnostics = [args.diagnostic]
        cfg.validate()
    bundle = run(cfg, out=args.out, workers=args.workers)
    log.info("invariants %s, trends %s", bundle.summary["invariants_ok"], bundle.summary["trends_ok"])
    if bundle.exit_code != OK:
        return bundle.exit_code
    if args.strict_trends and not bundle.trends_ok:
        return TREND_UNVERIFIED
    return OK


def cmd_study(args):
    cfg = _load(args)
    table = convergence_study(cfg)
    out = _outdir(cfg, args)
    (out / "study.json").write_text(dumps({"config_hash": cfg.hash, **table.to_json()}))
    write_csv(table.rows, out / "study.csv")
    return TREND_UNVERIFIED if table.partial and args.strict_trends else OK


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="experiment config JSON (or a bundled config name)")
    common.add_argument("--out", help="output directory (defaults to the config's)")
    common.add_argument("--workers", type=int, default=None, help="concurrent diagnostics")
    common.add_argument("--seed", type=int, default=None, help="probe seed override")
    common.add_argument("--h", help="cell size for single-resolution commands, e.g. 1/64")
    common.add_argument("--strict-trends", action="store_true",
                        help="exit 1 when a trend is not confirmed")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="frachardy", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name, func, text in [("domain", cmd_domain, "build and emit the domain file"),
                             ("whitney", cmd_whitney, "emit the Whitney decomposition"),
                             ("energy", cmd_energy, "energies of the configured probes"),
                             ("capacity", cmd_capacity, "capacities of the configured compacta"),
                             ("study", cmd_study, "refinement study over the ladder")]:
        p = sub.add_parser(name, parents=[common], help=text)
        p.set_defaults(func=func)
    p = sub.add_parser("report", parents=[common], help="run diagnostics and write reports")
    p.add_argument("diagnostic", choices=[*DIAGNOSTICS, "all"])
    p.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except DomainError as exc:
        hint = f" (coarsest admissible h = {exc.min_h})" if exc.min_h is not None else ""
        print(f"error: {exc}{hint}", file=sys.stderr)
        return USAGE
    except (ValueError, FileNotFoundError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return USAGE


if __name__ == "__main__":
    sys.exit(main())
