"""Whitney decompositions of grid domains by greedy dyadic refinement."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .geometry import GridDomain, box_segment_distance

__all__ = ["DyadicCube", "WhitneyDecomposition", "whitney_decompose", "dilate",
           "STAR", "DOUBLE_STAR", "TRUNCATED"]

STAR = 17 / 16
DOUBLE_STAR = 9 / 8
TRUNCATED = "boundary-truncated"


@dataclass(frozen=True)
class DyadicCube:
    """Half-open cube ``corner * h + [0, width * h)^n`` of generation ``k``.

    ``corner`` is in absolute cell indices and ``width = 2**(J - k)`` cells,
    so the side is ``2**-k`` in domain units.
    """

    k: int
    corner: tuple
    width: int
    h: float

    @property
    def n(self) -> int:
        return len(self.corner)

    @property
    def side(self) -> float:
        return self.width * self.h

    @property
    def diam(self) -> float:
        return math.sqrt(self.n) * self.side

    @property
    def lo(self) -> np.ndarray:
        return np.asarray(self.corner, dtype=float) * self.h

    @property
    def hi(self) -> np.ndarray:
        return self.lo + self.side

    @property
    def center(self) -> np.ndarray:
        return self.lo + 0.5 * self.side

    def cell_indices(self) -> np.ndarray:
        """Absolute indices of the ``width**n`` cells of the cube."""
        axes = [np.arange(c, c + self.width) for c in self.corner]
        grids = np.meshgrid(*axes, indexing="ij")
        return np.column_stack([g.ravel() for g in grids])

    def to_json(self) -> dict:
        return {"k": self.k, "corner": list(self.corner), "width": self.width}


@dataclass(eq=False)
class WhitneyDecomposition:
    """Cubes partitioning the occupied cells of ``domain``.

    ``flags[i]`` is ``""`` for cubes satisfying ``diam <= dist <= 4 diam`` and
    ``"boundary-truncated"`` for finest-generation cells with no admissible cube.
    """

    domain: GridDomain
    cubes: list
    dist: np.ndarray
    flags: list
    cell_cube: np.ndarray
    star: float = STAR
    double_star: float = DOUBLE_STAR
    meta: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.cubes)

    @cached_property
    def members(self) -> list:
        """Occupied-cell indices of each cube."""
        order = np.argsort(self.cell_cube, kind="stable")
        bounds = np.searchsorted(self.cell_cube[order], np.arange(len(self.cubes) + 1))
        return [order[bounds[i]:bounds[i + 1]] for i in range(len(self.cubes))]

    @property
    def valid(self) -> np.ndarray:
        return np.array([f == "" for f in self.flags], dtype=bool)

    @property
    def valid_indices(self) -> np.ndarray:
        return np.flatnonzero(self.valid)

    @cached_property
    def flagged_cells(self) -> np.ndarray:
        bad = ~self.valid
        return bad[self.cell_cube]

    def generations(self) -> np.ndarray:
        return np.array([c.k for c in self.cubes])

    def check(self) -> dict:
        """Validator: inequality holds for unflagged cubes and cells are partitioned."""
        diam = np.array([c.diam for c in self.cubes])
        ok = self.valid
        lower = np.all(diam[ok] <= self.dist[ok] * (1 + 1e-12))
        upper = np.all(self.dist[ok] <= 4 * diam[ok] * (1 + 1e-12))
        counts = np.bincount(self.cell_cube, minlength=len(self.cubes))
        sizes = np.array([c.width ** c.n for c in self.cubes])
        partition = (len(self.cell_cube) == self.domain.size and
                     np.all(self.cell_cube >= 0) and np.array_equal(counts, sizes))
        return {"lower": bool(lower), "upper": bool(upper), "partition": bool(partition),
                "ok": bool(lower and upper and partition)}

    @cached_property
    def overlap(self) -> int:
        """Largest number of ``Q**`` dilates containing a single cell center."""
        count = np.zeros(self.domain.size, dtype=np.int64)
        for cube in self.cubes:
            count[dilate(cube, self.double_star, self.domain)] += 1
        return int(count.max())

    def to_json(self) -> list:
        return [{"k": c.k, "corner": list(c.corner), "dist": float(d), "flag": f}
                for c, d, f in zip(self.cubes, self.dist, self.flags)]


def _cube_distance(domain, corners, width):
    lo = corners * domain.hf
    return box_segment_distance(lo, lo + width * domain.hf, domain.seg_a, domain.seg_b)


def whitney_decompose(domain: GridDomain, coarsest: int | None = None) -> WhitneyDecomposition:
    """Greedy coarse-to-fine Whitney decomposition on the dyadic mesh.

    A dyadic cube is emitted as soon as all its cells are occupied and
    ``diam(Q) <= dist(Q, boundary) <= 4 diam(Q)``; otherwise it is split.
    Single cells that still fail are emitted flagged as boundary-truncated.
    """
    n, J, hf = domain.n, domain.J, domain.hf
    occupied = domain.cells
    extent = occupied.max(axis=0) - occupied.min(axis=0) + 1
    if coarsest is None:
        span = int(2 * extent.max())
        coarsest = J - max(0, math.ceil(math.log2(span)))
    width = 2 ** (J - coarsest)
    candidates = np.unique(np.floor_divide(occupied, width) * width, axis=0)

    cubes, dists, flags = [], [], []
    cell_cube = np.full(domain.size, -1, dtype=np.int64)
    rel = occupied
    k = coarsest
    while len(candidates):
        dist = _cube_distance(domain, candidates, width)
        owner = np.floor_divide(rel, width) * width
        # occupied-cell count per candidate decides "inside"
        keys = {tuple(c): i for i, c in enumerate(candidates)}
        counts = np.zeros(len(candidates), dtype=np.int64)
        cell_owner = np.full(domain.size, -1, dtype=np.int64)
        for idx in np.flatnonzero(cell_cube < 0):
            j = keys.get(tuple(owner[idx]))
            if j is not None:
                counts[j] += 1
                cell_owner[idx] = j
        diam = math.sqrt(n) * width * hf
        inside = (counts == width ** n) & (dist > 0)
        good = inside & (diam <= dist) & (dist <= 4 * diam)
        last = width == 1
        emit = good | last if last else good
        for j in np.flatnonzero(emit):
            cube_id = len(cubes)
            cubes.append(DyadicCube(k, tuple(int(c) for c in candidates[j]), width, hf))
            dists.append(float(dist[j]))
            flags.append("" if good[j] else TRUNCATED)
            cell_cube[cell_owner == j] = cube_id
        if last:
            break
        rest = candidates[~emit]
        half = width // 2
        offsets = np.array(np.meshgrid(*[[0, half]] * n, indexing="ij")).reshape(n, -1).T
        children = (rest[:, None, :] + offsets[None, :, :]).reshape(-1, n)
        free = occupied[cell_cube < 0]
        present = np.unique(np.floor_divide(free, half) * half, axis=0)
        child_set = {tuple(c) for c in children}
        candidates = np.array([c for c in present if tuple(c) in child_set],
                              dtype=np.int64).reshape(-1, n)
        width = half
        k += 1

    return WhitneyDecomposition(domain, cubes, np.array(dists), flags, cell_cube,
                                meta={"coarsest": coarsest, "finest": J})


def dilate(cube: DyadicCube, factor: float, domain: GridDomain) -> np.ndarray:
    """Occupied cells whose centers lie in the closed ``factor``-dilate of ``cube``."""
    half = 0.5 * factor * cube.width
    center = np.asarray(cube.corner, dtype=float) + 0.5 * cube.width
    lo = np.ceil(center - half - 0.5 - 1e-9).astype(np.int64)
    hi = np.floor(center + half - 0.5 + 1e-9).astype(np.int64)
    axes = [np.arange(a, b + 1) for a, b in zip(lo, hi)]
    grids = np.meshgrid(*axes, indexing="ij")
    idx = domain.lookup(np.column_stack([g.ravel() for g in grids]))
    return idx[idx >= 0]
