"""Capacitary testing of weighted embeddings and Hardy-constant brackets."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg

from ..capacity import CompactCellSet, SolverConfig, solve_capacity
from ..energy import (HARDY, EnergyForm, GridFunction, WeightField, seminorm_p, weight_field,
                      weighted_mass)
from ..geometry import GridDomain
from ..params import EnergyParams
from ..whitney import WhitneyDecomposition
from .levels import level_truncation

__all__ = [
    "implied_hardy_constant",
    "MazyaItem",
    "MazyaReport",
    "mazya_test",
    "ReplayResult",
    "mazya_replay",
    "level_set_compacta",
    "whitney_union",
    "whitney_union_family",
    "concentric_family",
    "HardyReport",
    "hardy_report",
    "rayleigh_span",
    "discrete_hardy_constant",
]


def implied_hardy_constant(c: float, p: float) -> float:
    """``C = c 2^(3p+2) / (1 - 2^-p)``, the embedding constant implied by testing constant ``c``."""
    return c * 2.0 ** (3 * p + 2) / (1.0 - 2.0 ** (-p))


def _mass(K: CompactCellSet, w: WeightField):
    vals = w.values[K.cells], w.lower[K.cells], w.upper[K.cells]
    vol = K.domain.cell_volume
    return tuple(math.fsum(v) * vol for v in vals)


@dataclass
class MazyaItem:
    label: str
    cells: int
    mass: float
    mass_bracket: tuple
    cap: float
    gap: float
    status: str

    @property
    def ratio(self) -> float:
        if self.cap <= self.gap or self.cap <= 0.0:
            return float("inf")
        return self.mass / self.cap

    def row(self) -> dict:
        return {"K": self.label, "cells": self.cells, "mass": self.mass,
                "mass_lo": self.mass_bracket[0], "mass_hi": self.mass_bracket[1],
                "cap": self.cap, "gap": self.gap, "status": self.status, "ratio": self.ratio}


@dataclass
class MazyaReport:
    items: list
    params: EnergyParams
    weight_kind: str
    domain_hash: str

    @property
    def ratios(self) -> np.ndarray:
        return np.array([it.ratio for it in self.items])

    @property
    def c(self) -> float:
        return float(np.max(self.ratios)) if self.items else 0.0

    @property
    def implied_constant(self) -> float:
        return implied_hardy_constant(self.c, self.params.p)

    def rows(self):
        return [it.row() for it in self.items]

    def to_json(self) -> dict:
        return {"kind": "mazya", "weight": self.weight_kind, "domain_hash": self.domain_hash,
                "params": self.params.to_dict(), "c": self.c, "C": self.implied_constant,
                "items": self.rows()}


def mazya_test(family, w: WeightField, form: EnergyForm, config: SolverConfig | None = None,
               labels=None) -> MazyaReport:
    """Ratios ``int_K w / cap(K, G)`` over a family of compact cell sets.

    A capacity not exceeding its own gap makes the ratio infinite; this is
    recorded, not raised.
    """
    items = []
    for i, K in enumerate(family):
        res = solve_capacity(K, form, config)
        mass, lo, hi = _mass(K, w)
        label = labels[i] if labels is not None else (K.label or f"K{i}")
        items.append(MazyaItem(label, len(K), mass, (lo, hi), res.value, res.gap, res.status))
    return MazyaReport(items, form.params, w.kind, form.domain.hash)


# -- compact families -----------------------------------------------------------


def level_set_compacta(u: GridFunction):
    """``(k, closure of A_(k+1))`` for every nonempty annulus of ``u``."""
    dec = level_truncation(u)
    out = []
    for k1 in dec.levels:
        cells = np.flatnonzero(dec.A(k1))
        out.append((int(k1) - 1, CompactCellSet(u.domain, cells, label=f"A[{int(k1)}]")))
    return dec, out


def whitney_union(W: WhitneyDecomposition, cube_ids, label="") -> CompactCellSet:
    return CompactCellSet.from_cubes(W, cube_ids, label)


def whitney_union_family(W: WhitneyDecomposition, generations) -> list:
    """``K_g`` = union of unflagged cubes of generation at most ``g``, for each ``g``."""
    gens = W.generations()
    valid = W.valid
    out = []
    for g in generations:
        ids = np.flatnonzero(valid & (gens <= g))
        out.append(whitney_union(W, ids, label=f"K_gen<={g}"))
    return out


def concentric_family(domain: GridDomain, depths) -> list:
    """``{dist >= t}`` for each depth ``t``, excluding collar cells."""
    out = []
    for t in depths:
        cells = np.flatnonzero((domain.dist >= t) & domain.interior)
        out.append(CompactCellSet(domain, cells, label=f"dist>={t:g}"))
    return out


# -- replay of the sufficiency argument ---------------------------------------------


@dataclass
class ReplayResult:
    lhs: float
    rhs: float
    c_emp: float
    constant: float
    levels: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return self.lhs <= self.rhs * (1.0 + 1e-12)


def mazya_replay(u: GridFunction, w: WeightField, form: EnergyForm,
                 config: SolverConfig | None = None) -> ReplayResult:
    """Check ``int |u|^p w <= C_emp |u|^p`` with ``C_emp`` from ``u``'s own level sets.

    ``c_emp`` is the largest ratio ``int_{A_(k+1)} w / cap(A_(k+1))``.  Each
    capacity is capped by the energy of the truncation ``u_k``, which is
    admissible for ``A_(k+1)``; an inexact solve can therefore only shrink
    ``c_emp`` and make the check harder.
    """
    p = form.params.p
    dec, compacta = level_set_compacta(u)
    levels = []
    c_emp = 0.0
    for k, K in compacta:
        res = solve_capacity(K, form, config)
        test = seminorm_p(dec.truncation(k), form)
        cap = min(res.value, test)
        mass = _mass(K, w)[0]
        ratio = mass / cap if cap > 0 else float("inf")
        c_emp = max(c_emp, ratio)
        levels.append({"k": k, "mass": mass, "cap": cap, "truncation_energy": test,
                       "ratio": ratio})
    lhs = weighted_mass(u, w, p)
    constant = implied_hardy_constant(c_emp, p)
    rhs = constant * seminorm_p(u, form) if c_emp > 0 else 0.0
    return ReplayResult(lhs, rhs, c_emp, constant, levels)


# -- Hardy constant bracket -------------------------------------------------------------


def rayleigh_span(probes, form: EnergyForm, w: WeightField, rtol: float = 1e-12):
    """Largest ``sum |u|^2 w h^n / |u|^2`` over the linear span of the probes (p = 2)."""
    if form.params.p != 2.0:
        raise ValueError("the span maximization needs p = 2")
    U = np.array([u.values for u in probes])
    vol = form.domain.cell_volume
    mass = (U * w.values) @ U.T * vol
    energy = np.array([[form.bilinear(a, b) for b in U] for a in U])
    lam, vec = linalg.eigh(energy)
    keep = lam > rtol * lam.max()
    basis = vec[:, keep] / np.sqrt(lam[keep])
    reduced = basis.T @ mass @ basis
    vals, vecs = linalg.eigh(reduced)
    coef = basis @ vecs[:, -1]
    return float(vals[-1]), GridFunction(form.domain, coef @ U)


def dense_kernel(form: EnergyForm) -> np.ndarray:
    ci, cj = form.coords
    return form.table[np.abs(ci[:, None] - ci[None, :]), np.abs(cj[:, None] - cj[None, :])]


def discrete_hardy_constant(form: EnergyForm, w: WeightField | None = None):
    """Best constant of the discrete weighted embedding for ``p = 2``.

    Largest eigenvalue of ``M u = lambda (2 L) u`` over functions vanishing on
    the collar, with ``M`` the diagonal weighted mass and ``L`` the graph
    Laplacian of the pair kernel.  Dense; meant for a few thousand cells.
    """
    if form.params.p != 2.0:
        raise ValueError("the eigenvalue path needs p = 2")
    domain = form.domain
    w = w or weight_field(domain, form.params, HARDY)
    free = domain.interior
    W = dense_kernel(form)
    L = np.diag(W.sum(axis=1)) - W
    A = 2.0 * L[np.ix_(free, free)]
    M = np.diag(w.values[free] * domain.cell_volume)
    vals, vecs = linalg.eigh(M, A, subset_by_index=[int(free.sum()) - 1] * 2)
    u = np.zeros(domain.size)
    u[free] = vecs[:, -1]
    return float(vals[-1]), GridFunction(domain, u)


@dataclass
class HardyReport:
    lower: float
    upper: float
    c: float
    quotients: list
    params: EnergyParams
    domain_hash: str
    meta: dict = field(default_factory=dict)

    def bracket(self):
        return (self.lower, self.upper)

    def rows(self):
        return [{"probe": i, "quotient": q} for i, q in enumerate(self.quotients)]

    def to_json(self) -> dict:
        return {"kind": "hardy", "domain_hash": self.domain_hash, "params": self.params.to_dict(),
                "bracket": [self.lower, self.upper], "c": self.c, "items": self.rows(),
                **self.meta}


def hardy_report(domain: GridDomain, params: EnergyParams, probes, compacta=(),
                 config: SolverConfig | None = None, use_span: bool = True) -> HardyReport:
    """Bracket ``[best probe quotient, c 2^(3p+2) / (1 - 2^-p)]`` for the Hardy constant.

    ``c`` is tested on the supplied compacta together with the level-set
    compacta of every probe, which keeps the bracket consistent.  For
    ``p = 2`` the lower end is maximized over the span of the probes.

    Raises
    ------
    AssertionError
        If the lower end exceeds the upper end.
    """
    form = EnergyForm(params, domain)
    w = weight_field(domain, params, HARDY)
    probes = list(probes)
    quotients = []
    for u in probes:
        e = seminorm_p(u, form)
        quotients.append(weighted_mass(u, w, params.p) / e if e > 0 else float("inf"))
    lower = max(quotients) if quotients else 0.0
    meta = {}
    tested = list(probes)
    if use_span and params.p == 2.0 and len(probes) > 1:
        span, best = rayleigh_span(probes, form, w)
        meta["span_quotient"] = span
        lower = max(lower, span)
        tested.append(best)
    family = list(compacta)
    for u in tested:
        family.extend(K for _, K in level_set_compacta(u)[1])
    report = mazya_test(family, w, form, config)
    upper = report.implied_constant
    if lower > upper * (1 + 1e-9):
        raise AssertionError(f"empty Hardy bracket: lower {lower:.6g} > upper {upper:.6g}")
    return HardyReport(lower, upper, report.c, quotients, params, domain.hash, meta)
