"""Config-driven experiment runs and refinement studies.

A run builds the domain at every cell size of the resolution ladder, runs the
selected diagnostics, and writes one JSON report per (diagnostic, h) plus a
combined CSV.  Checks come in two classes: invariants (hard; a failure is a
bug or a broken premise) and trends (soft; numerical evidence only).
"""

from __future__ import annotations

import csv
import hashlib
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from importlib import resources
from pathlib import Path

import numpy as np

from . import __version__
from .analysis.levels import level_truncation
from .analysis.maximal import local_maximal, maximal_boundedness_probe, whitney_cap_lower_check
from .analysis.mazya import (concentric_family, hardy_report, mazya_test, whitney_union)
from .analysis.probes import cutoff_probes, nearest_cubes, random_cell_probes, smooth_probes
from .analysis.quasi import (CapacityCache, quasiadditivity, slit_whitney_compact,
                             zero_extension_report)
from .capacity import (CompactCellSet, SolverConfig, boundary_ramp_family, slit_test_family,
                       solve_capacity)
from .energy import EXTERIOR, HARDY, EnergyForm, GridFunction, seminorm_p, weight_field
from .geometry import DomainError, SlitSnowflakeSpec, build_domain, parse_h
from .params import EnergyParams
from .whitney import whitney_decompose

__all__ = ["DIAGNOSTICS", "ExperimentConfig", "RunBundle", "run", "convergence_study",
           "StudyTable", "bundled_config", "build_compacta", "build_probes", "dumps"]

DIAGNOSTICS = ("mazya", "quasi", "zeroext", "hardy", "maximal", "caplower")

# exit codes
OK, TREND_UNVERIFIED, USAGE, INVARIANT = 0, 1, 2, 3


def _clean(obj):
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        return x if math.isfinite(x) else ("inf" if x > 0 else "-inf" if x < 0 else "nan")
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, Fraction):
        return str(obj)
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    return obj


def dumps(obj) -> str:
    """Canonical JSON: sorted keys, non-finite floats as strings."""
    return json.dumps(_clean(obj), sort_keys=True, indent=1) + "\n"


@dataclass
class ExperimentConfig:
    """Everything a run needs; loaded from JSON with rational cell sizes."""

    name: str
    domain: dict
    params: EnergyParams
    ladder: list
    diagnostics: list
    compacta: dict = field(default_factory=dict)
    probes: dict = field(default_factory=dict)
    solver: SolverConfig = field(default_factory=SolverConfig)
    expect: dict = field(default_factory=dict)
    out: str = "out"
    seed: int = 0
    workers: int = 1

    def __post_init__(self):
        self.ladder = [parse_h(h) for h in self.ladder]
        self.validate()

    def validate(self):
        if not self.diagnostics:
            raise ValueError("diagnostic list is empty")
        unknown = [d for d in self.diagnostics if d not in DIAGNOSTICS]
        if unknown:
            raise ValueError(f"unknown diagnostics {unknown}; choose from {DIAGNOSTICS}")
        if not self.ladder:
            raise ValueError("resolution ladder is empty")
        if any(b >= a for a, b in zip(self.ladder, self.ladder[1:])):
            raise ValueError("resolution ladder must be strictly decreasing")
        if self.params.n != (1 if self.domain.get("kind") == "interval" else 2):
            raise ValueError("params.n does not match the domain dimension")
        for h in self.ladder:
            _check_admissible_h(self.domain, h)

    @classmethod
    def from_dict(cls, doc: dict) -> "ExperimentConfig":
        doc = dict(doc)
        p = doc.pop("params")
        solver = SolverConfig(**doc.pop("solver", {}))
        return cls(params=EnergyParams(float(p["s"]), float(p["p"]), int(p.get("n", 2))),
                   solver=solver, **doc)

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))

    def to_dict(self) -> dict:
        return {"name": self.name, "domain": self.domain, "params": self.params.to_dict(),
                "ladder": [str(h) for h in self.ladder], "diagnostics": list(self.diagnostics),
                "compacta": self.compacta, "probes": self.probes,
                "solver": vars(self.solver), "expect": self.expect, "out": self.out,
                "seed": self.seed, "workers": self.workers}

    @property
    def hash(self) -> str:
        doc = self.to_dict()
        doc.pop("out")
        doc.pop("workers")
        return hashlib.sha256(dumps(doc).encode()).hexdigest()[:16]


def _check_admissible_h(domain_spec: dict, h: Fraction):
    """Fail fast on an inadmissible cell size without rasterizing."""
    kind = domain_spec.get("kind")
    if kind in ("koch", "koch_minus_slit"):
        level = int(domain_spec.get("level", 4))
        side = float(domain_spec.get("side", 3.44 if kind == "koch_minus_slit" else 1.0))
        edge = side / 3 ** level
        if float(h) > edge:
            coarse = Fraction(1, 2 ** math.ceil(math.log2(1 / edge)))
            raise DomainError(f"h = {h} does not resolve level-{level} edges; need h <= {coarse}",
                              coarse)
    if kind == "disk" and h > Fraction(1, 8):
        raise DomainError(f"h = {h} does not resolve the disk; need h <= 1/8", Fraction(1, 8))
    if kind in ("square", "interval", "square_minus_slit", "punctured_square") and h > 1:
        raise DomainError(f"h = {h} exceeds the domain", Fraction(1))


def bundled_config(name: str) -> ExperimentConfig:
    """Load one of the configs shipped with the package (``cube_sp_lt_1``, ...)."""
    text = resources.files("frachardy.configs").joinpath(f"{name}.json").read_text()
    return ExperimentConfig.from_dict(json.loads(text))


# -- families ------------------------------------------------------------------------


def _region(name: str):
    if name in (None, "all"):
        return lambda c: True
    if name == "octant":
        # fundamental triangle of the square's symmetry group
        return lambda c: c.center[1] < 0.5 and c.center[1] <= c.center[0] <= 0.5
    if name == "half":
        return lambda c: c.center[0] <= 0.5
    raise ValueError(f"unknown region {name!r}")


def build_compacta(spec: dict, domain, W):
    """Returns ``(mode, [CompactCellSet])`` from a compact-family spec."""
    kind = spec.get("kind", "whitney_union")
    if kind == "whitney_union":
        keep = _region(spec.get("region"))
        gens = W.generations()
        out = []
        for g in spec.get("generations", []):
            ids = [q for q in W.valid_indices if gens[q] <= g and keep(W.cubes[q])]
            if ids and not (out and len(out[-1]) == sum(len(W.members[q]) for q in ids)):
                out.append(whitney_union(W, ids, label=f"gen<={g}"))
        return "weak", out
    if kind == "slit":
        slit = SlitSnowflakeSpec.from_dict(domain.flags)
        return "weak", [slit_whitney_compact(W, slit, m) for m in spec.get("m", [2, 4, 8])]
    if kind == "concentric":
        return "general", concentric_family(domain, spec.get("depths", [0.25]))
    if kind == "level_sets":
        return "general", []
    raise ValueError(f"unknown compact family {kind!r}")


def build_probes(spec: dict, domain, W, seed: int):
    kind = spec.get("kind", "smooth")
    count = int(spec.get("count", 8))
    if kind == "smooth":
        return smooth_probes(domain, count, seed)
    if kind == "cells":
        return random_cell_probes(domain, count, seed)
    if kind == "cutoffs":
        return cutoff_probes(W, nearest_cubes(W, spec.get("generations")))
    if kind == "ramp":
        return boundary_ramp_family(domain, spec.get("widths", [0.25, 0.125, 0.0625]))
    if kind == "slit_family":
        slit = SlitSnowflakeSpec.from_dict(domain.flags)
        out = []
        for m in spec.get("m", [2, 4, 8, 16]):
            try:
                out.append(slit_test_family(slit, m, domain))
            except DomainError:
                continue
        return out
    raise ValueError(f"unknown probe family {kind!r}")


# -- checks -------------------------------------------------------------------------


def _trend(values, rule):
    """Evaluate a trend rule on a sequence; ``None`` when there is nothing to judge."""
    vals = [v for v in values if isinstance(v, (int, float)) and math.isfinite(v)]
    if rule is None or len(vals) < 2:
        return None
    if rule == "increasing":
        return all(b > a for a, b in zip(vals, vals[1:]))
    if rule == "decreasing":
        return all(b < a for a, b in zip(vals, vals[1:]))
    if rule.startswith("bounded:"):
        factor = float(rule.split(":", 1)[1])
        return max(vals) / min(vals) < factor if min(vals) > 0 else False
    raise ValueError(f"unknown trend rule {rule!r}")


def _diag_mazya(ctx):
    cfg, domain, W, form = ctx["config"], ctx["domain"], ctx["W"], ctx["form"]
    kind = cfg.compacta.get("weight", HARDY)
    w = weight_field(domain, cfg.params, kind)
    rep = mazya_test(ctx["compacta"], w, form, cfg.solver)
    inv = {"capacity_nonnegative": all(it.cap >= -it.gap for it in rep.items)}
    return rep.to_json(), rep.rows(), inv, [it.ratio for it in rep.items]


def _diag_quasi(ctx):
    rep = quasiadditivity(ctx["compacta"], ctx["W"], ctx["form"], ctx["mode"], ctx["config"].solver,
                          cache=ctx["cache"])
    inv = {"subadditivity_floor": all(it.ratio >= it.lower_limit for it in rep.items if it.defined)}
    return rep.to_json(), rep.rows(), inv, [it.ratio for it in rep.items]


def _diag_zeroext(ctx):
    rep = zero_extension_report(ctx["domain"], ctx["config"].params, ctx["probes"],
                                weight=ctx["exterior"], config=ctx["config"].solver)
    inv = {"ratio_at_least_one": all(lo >= 1.0 - 1e-12 for lo, _ in rep.brackets)}
    return rep.to_json(), rep.rows(), inv, rep.ratios


def _diag_hardy(ctx):
    cfg = ctx["config"]
    try:
        rep = hardy_report(ctx["domain"], cfg.params, ctx["probes"], ctx["compacta"], cfg.solver)
    except AssertionError as exc:
        return {"kind": "hardy", "error": str(exc)}, [], {"bracket_nonempty": False}, []
    return rep.to_json(), rep.rows(), {"bracket_nonempty": rep.lower <= rep.upper}, rep.quotients


def _diag_maximal(ctx):
    probes = ctx["probes"]
    rep = maximal_boundedness_probe(ctx["domain"], ctx["config"].params, probes)
    dominated = all(np.all(local_maximal(u).values >= np.abs(u.values)) for u in probes)
    return rep.to_json(), rep.rows(), {"dominates_abs": dominated}, rep.ratios


def _diag_caplower(ctx):
    rep = whitney_cap_lower_check(ctx["W"], ctx["form"], config=ctx["config"].solver)
    inv = {"positive": all(it["ratio"] > 0 for it in rep.items)}
    return rep.to_json(), rep.rows(), inv, list(rep.by_generation().values())


_RUNNERS = {"mazya": _diag_mazya, "quasi": _diag_quasi, "zeroext": _diag_zeroext,
            "hardy": _diag_hardy, "maximal": _diag_maximal, "caplower": _diag_caplower}


@dataclass
class RunBundle:
    config: ExperimentConfig
    reports: list
    rows: list
    summary: dict

    @property
    def exit_code(self) -> int:
        if not self.summary["invariants_ok"]:
            return INVARIANT
        return OK

    @property
    def trends_ok(self) -> bool:
        return self.summary["trends_ok"]


def _tag(h) -> str:
    return str(h).replace("/", "-")


def run(config: ExperimentConfig, out=None, workers: int | None = None, seed: int | None = None,
        write: bool = True) -> RunBundle:
    """Execute every diagnostic at every resolution and write the report bundle."""
    seed = config.seed if seed is None else seed
    workers = max(1, workers or config.workers)
    outdir = Path(out or config.out)
    reports, rows, checks = [], [], []
    for h in config.ladder:
        domain = build_domain(config.domain, h)
        W = whitney_decompose(domain)
        form = EnergyForm(config.params, domain)
        mode, compacta = build_compacta(config.compacta, domain, W)
        probes = build_probes(config.probes, domain, W, seed) if config.probes else []
        if config.compacta.get("kind") == "level_sets":
            compacta = [K for u in probes for K in _level_sets(u)]
        ctx = {"config": config, "domain": domain, "W": W, "form": form, "mode": mode,
               "compacta": compacta, "probes": probes, "cache": CapacityCache(form, config.solver),
               "exterior": weight_field(domain, config.params, EXTERIOR)
               if "zeroext" in config.diagnostics else None}
        whitney_ok = W.check()["ok"]
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(lambda d: _RUNNERS[d](ctx), config.diagnostics))
        for diag, (doc, items, inv, series) in zip(config.diagnostics, results):
            inv = {"whitney_valid": whitney_ok, **inv}
            trend = _trend(series, config.expect.get(diag))
            flagged = any(it.get("status") not in (None, "converged") for it in items)
            report = {"diagnostic": diag, "h": str(h), "config_hash": config.hash,
                      "domain_hash": domain.hash, "code_version": __version__,
                      "invariants": inv, "trend": {"rule": config.expect.get(diag), "ok": trend},
                      "solver_flagged": flagged, "report": doc}
            reports.append(report)
            checks.append((all(inv.values()), trend, flagged))
            for i, item in enumerate(items):
                rows.append({"diagnostic": diag, "h": str(h), "item": i,
                             **{k: v for k, v in item.items() if not isinstance(v, (list, dict))}})
            if write:
                outdir.mkdir(parents=True, exist_ok=True)
                (outdir / f"{diag}_{_tag(h)}.json").write_text(dumps(report))
    summary = {"config": config.name, "config_hash": config.hash, "code_version": __version__,
               "seed": seed, "invariants_ok": all(c[0] for c in checks),
               "trends_ok": all(c[1] is not False for c in checks) and not any(c[2] for c in checks),
               "reports": [f"{r['diagnostic']}_{_tag(r['h'])}.json" for r in reports]}
    if write:
        (outdir / "summary.json").write_text(dumps(summary))
        write_csv(rows, outdir / "results.csv")
    return RunBundle(config, reports, rows, summary)


def _level_sets(u: GridFunction):
    dec = level_truncation(u)
    return [CompactCellSet(u.domain, np.flatnonzero(dec.A(k)), label=f"A[{k}]") for k in dec.levels]


def write_csv(rows, path):
    keys = []
    for r in rows:
        keys.extend(k for k in r if k not in keys)
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=keys)
        writer.writeheader()
        for r in rows:
            writer.writerow(_clean(r))


# -- refinement study ------------------------------------------------------------------


@dataclass
class StudyTable:
    rows: list
    partial: bool

    def to_json(self) -> dict:
        return {"partial": self.partial, "rows": self.rows}


def _brute_seminorm(u: GridFunction, params: EnergyParams) -> float:
    x = u.domain.centers
    h = u.domain.hf
    total = 0.0
    for i in range(len(x)):
        r = np.linalg.norm(x - x[i], axis=1)
        r[i] = np.inf
        total += np.sum(np.abs(u.values[i] - u.values) ** params.p * h ** (2 * params.n)
                        / r ** params.kernel_exponent)
    return float(total)


def convergence_study(config: ExperimentConfig, depth: float = 0.25, seed: int | None = None) -> StudyTable:
    """Values against ``h`` for a fixed capacity, a fixed probe seminorm and its Hardy quotient.

    Adds an exact-scaling row (domain scaled by 2) and a brute-force oracle row
    for the pair sum at the coarsest level.
    """
    seed = config.seed if seed is None else seed
    if len(config.ladder) < 3:
        raise ValueError("a convergence study needs at least three resolutions")
    series = {"capacity": [], "seminorm": [], "hardy_quotient": []}
    done = []
    for h in config.ladder:
        try:
            domain = build_domain(config.domain, h)
        except DomainError:
            break
        form = EnergyForm(config.params, domain)
        K = concentric_family(domain, [depth])[0]
        res = solve_capacity(K, form, config.solver)
        u = smooth_probes(domain, 1, seed)[0]
        e = seminorm_p(u, form)
        w = weight_field(domain, config.params, HARDY)
        q = float(np.sum(np.abs(u.values) ** config.params.p * w.values) * domain.cell_volume) / e
        series["capacity"].append(res.value)
        series["seminorm"].append(e)
        series["hardy_quotient"].append(q)
        done.append(h)
    rows = []
    for name, vals in series.items():
        for i, (h, v) in enumerate(zip(done, vals)):
            change = abs(v - vals[i - 1]) / abs(vals[i - 1]) if i else None
            rows.append({"quantity": name, "h": str(h), "value": v, "relative_change": change})
    if done:
        h0 = done[0]
        domain = build_domain(config.domain, h0)
        form = EnergyForm(config.params, domain)
        lam = 2
        K = concentric_family(domain, [depth])[0]
        base = solve_capacity(K, form, config.solver).value
        scaled_form = form.scaled(lam)
        scaled = solve_capacity(CompactCellSet(scaled_form.domain, K.cells), scaled_form,
                                config.solver).value
        expected = lam ** (config.params.n - config.params.sp)
        rows.append({"quantity": "exact_scaling", "h": str(h0), "value": scaled / base,
                     "relative_change": abs(scaled / base - expected) / expected})
        if domain.size <= 4096:
            u = smooth_probes(domain, 1, seed)[0]
            fast = seminorm_p(u, form)
            brute = _brute_seminorm(u, config.params)
            rows.append({"quantity": "seminorm_oracle", "h": str(h0), "value": fast,
                         "relative_change": abs(fast - brute) / abs(brute)})
    return StudyTable(rows, partial=len(done) < 2)
