"""Local maximal operator, the mean split of Whitney cubes, and related probes."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .. import _kernels
from ..capacity import CompactCellSet, SolverConfig, solve_capacity
from ..energy import EnergyForm, GridFunction, seminorm_p
from ..geometry import GridDomain
from ..params import EnergyParams
from ..whitney import WhitneyDecomposition

__all__ = [
    "local_maximal",
    "admissible_radii",
    "ball_ratio",
    "mean_split",
    "cube_means",
    "MaximalReport",
    "maximal_boundedness_probe",
    "CapLowerReport",
    "whitney_cap_lower_check",
]


def admissible_radii(domain: GridDomain) -> np.ndarray:
    """Largest ``k`` with ``k h < dist(x, boundary)`` for every cell."""
    ratio = domain.dist / domain.hf
    k = np.ceil(ratio).astype(np.int64) - 1
    return np.maximum(k, 0)


def _offsets(n: int, kmax: int):
    r = np.arange(-kmax, kmax + 1)
    if n == 1:
        oi, oj = r, np.zeros_like(r)
    else:
        oi, oj = (g.ravel() for g in np.meshgrid(r, r, indexing="ij"))
    r2 = oi * oi + oj * oj
    keep = r2 < kmax * kmax if kmax > 0 else r2 == 0
    oi, oj, r2 = oi[keep], oj[keep], r2[keep]
    order = np.lexsort((oj, oi, r2))
    return (np.ascontiguousarray(oi[order]), np.ascontiguousarray(oj[order]),
            np.ascontiguousarray(r2[order]))


def local_maximal(u: GridFunction, domain: GridDomain | None = None) -> GridFunction:
    """``M_G u(x) = max_k`` average of ``|u|`` over cell centers in ``B(x, k h)``.

    ``k`` runs over ``1 .. K(x)`` with ``K(x) h < dist(x, boundary)``; ``k = 1``
    is the single cell, so ``M_G u >= |u|`` exactly.
    """
    domain = domain or u.domain
    kmax = admissible_radii(domain)
    cells = domain.cells
    ci = np.ascontiguousarray(cells[:, 0])
    cj = np.ascontiguousarray(cells[:, 1]) if domain.n == 2 else np.zeros_like(ci)
    origin = domain.origin
    grid = domain.index_grid if domain.n == 2 else domain.index_grid[:, None]
    oi, oj, r2 = _offsets(domain.n, int(kmax.max()) if len(kmax) else 0)
    vals = _kernels.local_maximal_sweep(grid, np.abs(u.values), ci, cj, origin[0],
                                        origin[1] if domain.n == 2 else 0, kmax, oi, oj, r2)
    return GridFunction(domain, vals, meta={"operator": "local_maximal"})


def ball_ratio(n: int) -> float:
    """``|Q| / |B(x, diam Q)|``: ``1/(2 pi)`` in 2-D and ``1/2`` in 1-D."""
    return 1.0 / (2.0 * math.pi) if n == 2 else 0.5


def cube_means(u: GridFunction, W: WhitneyDecomposition) -> np.ndarray:
    vals = u.values
    return np.array([vals[m].mean() for m in W.members])


def mean_split(u: GridFunction, W: WhitneyDecomposition):
    """Split unflagged cubes into ``W1 = {<u>_Q < 1/2}`` and ``W2`` (the rest)."""
    if np.any(u.values < 0):
        raise ValueError("mean split needs u >= 0")
    means = cube_means(u, W)
    ids = W.valid_indices
    low = means[ids] < 0.5
    return ids[low], ids[~low]


@dataclass
class MaximalReport:
    ratios: list
    skipped: int
    params: EnergyParams
    domain_hash: str

    @property
    def max_ratio(self) -> float:
        return max(self.ratios) if self.ratios else float("nan")

    def rows(self):
        return [{"probe": i, "ratio": r} for i, r in enumerate(self.ratios)]

    def to_json(self) -> dict:
        return {"kind": "maximal", "domain_hash": self.domain_hash, "params": self.params.to_dict(),
                "max_ratio": self.max_ratio, "skipped": self.skipped, "items": self.rows()}


def maximal_boundedness_probe(domain: GridDomain, params: EnergyParams, probes) -> MaximalReport:
    """``|M_G u|^p / |u|^p`` for every probe with nonzero seminorm."""
    params.require_convex()
    form = EnergyForm(params, domain)
    ratios, skipped = [], 0
    for u in probes:
        base = seminorm_p(u, form)
        if base <= 0.0:
            skipped += 1
            continue
        ratios.append(seminorm_p(local_maximal(u, domain), form) / base)
    return MaximalReport(ratios, skipped, params, domain.hash)


@dataclass
class CapLowerReport:
    items: list
    params: EnergyParams
    domain_hash: str
    meta: dict = field(default_factory=dict)

    def by_generation(self) -> dict:
        out = {}
        for it in self.items:
            out.setdefault(it["k"], []).append(it["ratio"])
        return {k: min(v) for k, v in sorted(out.items())}

    @property
    def min_ratio(self) -> float:
        return min(it["ratio"] for it in self.items)

    def rows(self):
        return list(self.items)

    def to_json(self) -> dict:
        return {"kind": "caplower", "domain_hash": self.domain_hash,
                "params": self.params.to_dict(), "min_ratio": self.min_ratio,
                "by_generation": {str(k): v for k, v in self.by_generation().items()},
                "items": self.rows()}


def whitney_cap_lower_check(W: WhitneyDecomposition, form: EnergyForm, generations=None,
                            per_generation: int = 3, config: SolverConfig | None = None) -> CapLowerReport:
    """``cap(Q, G) / side(Q)^(n - sp)`` for sample unflagged cubes of each generation.

    Within a generation the cubes are taken in increasing distance to the
    boundary, evenly spaced through the list, so both the nearest and the
    farthest cubes are represented.
    """
    form.params.require_subcritical()
    expo = form.params.n - form.params.sp
    valid = W.valid_indices
    gens = W.generations()
    wanted = sorted(set(gens[valid].tolist())) if generations is None else list(generations)
    items = []
    for k in wanted:
        ids = valid[gens[valid] == k]
        if len(ids) == 0:
            continue
        ids = ids[np.argsort(W.dist[ids], kind="stable")]
        pick = np.unique(np.linspace(0, len(ids) - 1, min(per_generation, len(ids))).round().astype(int))
        for q in ids[pick]:
            K = CompactCellSet(W.domain, W.members[q])
            res = solve_capacity(K, form, config)
            side = W.cubes[q].side
            items.append({"cube": int(q), "k": int(k), "side": side, "cap": res.value,
                          "gap": res.gap, "ratio": res.value / side ** expo})
    return CapLowerReport(items, form.params, W.domain.hash)
