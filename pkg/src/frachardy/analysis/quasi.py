"""Whitney quasiadditivity of capacity and the zero-extension ratio."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..capacity import CapacityResult, CompactCellSet, SolverConfig, solve_capacity
from ..energy import (EXTERIOR, EnergyForm, WeightField, seminorm_p, seminorm_zero_extended_p,
                      weight_field)
from ..geometry import GridDomain, SlitSnowflakeSpec
from ..params import EnergyParams
from ..whitney import WhitneyDecomposition
from .mazya import MazyaReport, mazya_test

__all__ = [
    "QuasiItem",
    "QuasiReport",
    "quasiadditivity",
    "CapacityCache",
    "slit_whitney_compact",
    "ZeroExtReport",
    "zero_extension_report",
]


class CapacityCache:
    """Memo of capacity solves keyed by the cell set, for one energy form."""

    def __init__(self, form: EnergyForm, config: SolverConfig | None = None):
        self.form = form
        self.config = config
        self._store = {}
        self.solves = 0

    def __call__(self, K: CompactCellSet) -> CapacityResult:
        key = K.cells.tobytes()
        if key not in self._store:
            self._store[key] = solve_capacity(K, self.form, self.config)
            self.solves += 1
        return self._store[key]


@dataclass
class QuasiItem:
    label: str
    total: float
    cap: float
    gap: float
    pieces: int
    piece_gap: float
    excluded: int

    @property
    def defined(self) -> bool:
        return self.cap > self.gap

    @property
    def ratio(self) -> float:
        return self.total / self.cap if self.defined else float("nan")

    @property
    def lower_limit(self) -> float:
        """``1 - 4 gap / cap``, the floor implied by subadditivity."""
        return 1.0 - 4.0 * (self.gap + self.piece_gap) / self.cap

    def row(self) -> dict:
        return {"K": self.label, "sum_pieces": self.total, "cap": self.cap, "gap": self.gap,
                "pieces": self.pieces, "excluded_cells": self.excluded, "ratio": self.ratio,
                "defined": self.defined}


@dataclass
class QuasiReport:
    items: list
    mode: str
    params: EnergyParams
    domain_hash: str

    @property
    def ratios(self) -> np.ndarray:
        return np.array([it.ratio for it in self.items])

    @property
    def N(self) -> float:
        r = self.ratios
        r = r[np.isfinite(r)]
        return float(r.max()) if len(r) else float("nan")

    def rows(self):
        return [it.row() for it in self.items]

    def to_json(self) -> dict:
        return {"kind": "quasi", "mode": self.mode, "domain_hash": self.domain_hash,
                "params": self.params.to_dict(), "N": self.N, "items": self.rows()}


def quasiadditivity(family, W: WhitneyDecomposition, form: EnergyForm, mode: str = "general",
                    config: SolverConfig | None = None, cache: CapacityCache | None = None) -> QuasiReport:
    """``N_K = sum_Q cap(K cap Q) / cap(K)`` over the Whitney cubes ``Q``.

    Cells of ``K`` lying in boundary-truncated cubes are left out of the sum
    and counted in ``excluded``.  In ``weak`` mode every ``K`` must be a union
    of whole unflagged cubes.
    """
    if mode not in ("general", "weak"):
        raise ValueError(f"unknown mode {mode!r}")
    if isinstance(family, CompactCellSet):
        family = [family]
    cache = cache or CapacityCache(form, config)
    valid = W.valid
    items = []
    for i, K in enumerate(family):
        owner = W.cell_cube[K.cells]
        cubes, counts = np.unique(owner, return_counts=True)
        if mode == "weak":
            full = np.array([len(W.members[q]) for q in cubes])
            if not (np.all(valid[cubes]) and np.array_equal(full, counts)):
                raise ValueError("weak mode needs K to be a union of whole unflagged Whitney cubes")
        excluded = int(counts[~valid[cubes]].sum())
        total = piece_gap = 0.0
        pieces = 0
        for q in cubes[valid[cubes]]:
            res = cache(CompactCellSet(K.domain, K.cells[owner == q]))
            total += res.value
            piece_gap += res.gap
            pieces += 1
        whole = cache(K)
        items.append(QuasiItem(K.label or f"K{i}", total, whole.value, whole.gap, pieces,
                               piece_gap, excluded))
    return QuasiReport(items, mode, form.params, K.domain.hash if items else "")


def slit_whitney_compact(W: WhitneyDecomposition, spec: SlitSnowflakeSpec, m: int) -> CompactCellSet:
    """``K_m``: union of unflagged Whitney cubes inside ``R`` with ``diam >= 1/(2m)``."""
    lo, hi = spec.r_bounds
    ids = [q for q in W.valid_indices
           if W.cubes[q].diam >= 1.0 / (2 * m) - 1e-12
           and np.all(W.cubes[q].lo >= lo - 1e-12) and np.all(W.cubes[q].hi <= hi + 1e-12)]
    if not ids:
        raise ValueError(f"no Whitney cube inside R has diameter >= 1/(2m) for m = {m}")
    return CompactCellSet.from_cubes(W, ids, label=f"K_{m}")


@dataclass
class ZeroExtReport:
    ratios: list
    brackets: list
    params: EnergyParams
    domain_hash: str
    mazya: MazyaReport | None = None
    skipped: int = 0
    meta: dict = field(default_factory=dict)

    @property
    def sup(self) -> float:
        return max(self.ratios) if self.ratios else float("nan")

    @property
    def sup_bracket(self):
        if not self.brackets:
            return (float("nan"), float("nan"))
        return (max(b[0] for b in self.brackets), max(b[1] for b in self.brackets))

    def rows(self):
        return [{"probe": i, "ratio": r, "lo": b[0], "hi": b[1]}
                for i, (r, b) in enumerate(zip(self.ratios, self.brackets))]

    def to_json(self) -> dict:
        out = {"kind": "zeroext", "domain_hash": self.domain_hash, "params": self.params.to_dict(),
               "sup": self.sup, "sup_bracket": list(self.sup_bracket), "skipped": self.skipped,
               "items": self.rows()}
        if self.mazya is not None:
            out["mazya"] = self.mazya.to_json()
        return out


def zero_extension_report(domain: GridDomain, params: EnergyParams, probes, compacta=(),
                          weight: WeightField | None = None,
                          config: SolverConfig | None = None) -> ZeroExtReport:
    """Ratios ``|E u|^p_{R^n} / |u|^p_G`` with exterior-weight brackets.

    When compacta are given, the capacitary test is also run with the
    exterior weight.
    """
    form = EnergyForm(params, domain)
    weight = weight or weight_field(domain, params, EXTERIOR)
    ratios, brackets, skipped = [], [], 0
    for u in probes:
        base = seminorm_p(u, form)
        if base <= 0.0:
            skipped += 1
            continue
        lo, hi = seminorm_zero_extended_p(u, form, weight)
        ratios.append(0.5 * (lo + hi) / base)
        brackets.append((lo / base, hi / base))
    compacta = list(compacta)
    mazya = mazya_test(compacta, weight, form, config) if compacta else None
    return ZeroExtReport(ratios, brackets, params, domain.hash, mazya, skipped)
