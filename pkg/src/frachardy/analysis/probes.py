"""Reproducible probe functions vanishing on the boundary collar."""

from __future__ import annotations

import numpy as np

from ..energy import GridFunction, clamp01, whitney_cutoff
from ..geometry import GridDomain
from ..whitney import WhitneyDecomposition

__all__ = ["smooth_probes", "random_cell_probes", "cutoff_probes", "nearest_cubes"]


def smooth_probes(domain: GridDomain, count: int, seed: int = 0, bumps: int = 3,
                  taper: float = 0.125) -> list:
    """Sums of Gaussian bumps times ``min(1, dist / taper)``.

    Each probe is a fixed continuous function sampled at cell centers, so the
    same seed gives the same functions at every resolution.
    """
    rng = np.random.default_rng(seed)
    x = domain.centers
    lo = domain.segments.reshape(-1, domain.n).min(axis=0)
    hi = domain.segments.reshape(-1, domain.n).max(axis=0)
    mid, half = 0.5 * (lo + hi), 0.5 * (hi - lo)
    scale = float(np.max(hi - lo))
    ramp = np.clip(domain.dist / taper, 0.0, 1.0) * domain.interior
    out = []
    for _ in range(count):
        v = np.zeros(len(x))
        for _ in range(bumps):
            c = mid + 0.7 * half * rng.uniform(-1.0, 1.0, domain.n)
            width = scale * rng.uniform(0.08, 0.3)
            amp = rng.uniform(0.2, 1.0)
            v += amp * np.exp(-np.sum((x - c) ** 2, axis=1) / (2 * width ** 2))
        out.append(GridFunction(domain, v * ramp, meta={"probe": "smooth"}))
    return out


def random_cell_probes(domain: GridDomain, count: int, seed: int = 0, clamp: bool = True) -> list:
    """Independent normal values per interior cell (mean 1/2, sd 1/2), zero on the collar."""
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(count):
        v = rng.normal(0.5, 0.5, domain.size) * domain.interior
        u = GridFunction(domain, v, meta={"probe": "cells"})
        out.append(clamp01(u) if clamp else u)
    return out


def nearest_cubes(W: WhitneyDecomposition, generations=None, per_generation: int = 1) -> list:
    """Unflagged cube ids closest to the boundary in each generation."""
    gens = W.generations()
    valid = W.valid_indices
    wanted = sorted(set(gens[valid].tolist())) if generations is None else generations
    out = []
    for k in wanted:
        ids = valid[gens[valid] == k]
        if len(ids):
            out.extend(ids[np.argsort(W.dist[ids], kind="stable")][:per_generation].tolist())
    return out


def cutoff_probes(W: WhitneyDecomposition, cube_ids) -> list:
    return [whitney_cutoff(W.cubes[q], W.domain) for q in cube_ids]
