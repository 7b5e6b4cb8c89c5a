"""Discrete bounded open sets on uniform dyadic grids.

A domain is an occupancy mask of cells ``[i h, (i+1) h) x [j h, (j+1) h)``
whose centers lie strictly inside a polygonal region, together with the
polygon itself.  The polygon is kept so that every distance to the boundary
is computed exactly (point-to-segment), never by grid propagation.

Boundary pieces come in two flavours:

* loop segments, which enclose the region and carry an outward unit normal;
* cuts (slits and punctures), which have measure zero, carry a zero normal,
  remove no cells, but do count as boundary for every distance.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property

import numpy as np

__all__ = [
    "DomainError",
    "GridDomain",
    "SlitSnowflakeSpec",
    "build_domain",
    "distance_field",
    "koch_vertices",
    "parse_h",
    "point_segment_distances",
    "min_distance_to_segments",
    "box_segment_distance",
    "domain_to_json",
    "domain_from_json",
]

_CHUNK = 4_000_000


class DomainError(ValueError):
    """Raised when a domain cannot be built at the requested resolution.

    ``min_h`` carries the coarsest admissible cell size when one exists.
    """

    def __init__(self, message, min_h=None):
        super().__init__(message)
        self.min_h = min_h


def parse_h(h) -> Fraction:
    """Return ``h`` as an exact dyadic fraction (``"1/64"``, ``0.125``, ...)."""
    if isinstance(h, str):
        value = Fraction(h.strip())
    elif isinstance(h, float):
        value = Fraction(h)
    else:
        value = Fraction(h)
    if value <= 0:
        raise DomainError(f"cell size must be positive, got {h}")
    num, den = value.numerator, value.denominator
    if (num & (num - 1)) or (den & (den - 1)):
        raise DomainError(f"cell size must be a power of two, got {value}")
    return value


def _dyadic_exponent(h: Fraction) -> int:
    """``J`` with ``h = 2**-J``."""
    return h.denominator.bit_length() - h.numerator.bit_length()


# -- exact distances ---------------------------------------------------------


def point_segment_distances(points, a, b):
    """Euclidean distances from ``points`` (N, n) to segments ``[a, b]`` (M, n).

    Returns an (N, M) array.  Degenerate segments (``a == b``) are points.
    """
    points = np.asarray(points, dtype=float)
    d = b - a
    len2 = np.einsum("ij,ij->i", d, d)
    safe = np.where(len2 > 0, len2, 1.0)
    rel = points[:, None, :] - a[None, :, :]
    t = np.einsum("nmk,mk->nm", rel, d) / safe
    t = np.clip(np.where(len2 > 0, t, 0.0), 0.0, 1.0)
    near = rel - t[..., None] * d[None, :, :]
    return np.sqrt(np.einsum("nmk,nmk->nm", near, near))


def min_distance_to_segments(points, a, b):
    """Minimum over segments of :func:`point_segment_distances`, chunked."""
    points = np.asarray(points, dtype=float)
    out = np.empty(len(points))
    step = max(1, _CHUNK // max(1, len(a)))
    for start in range(0, len(points), step):
        block = points[start:start + step]
        out[start:start + step] = point_segment_distances(block, a, b).min(axis=1)
    return out


def _box_segment_block(lo, hi, a, b):
    q, n = lo.shape
    m = len(a)
    d = b - a
    t0 = np.zeros((q, m))
    t1 = np.ones((q, m))
    hit = np.ones((q, m), dtype=bool)
    for k in range(n):
        dk = d[:, k][None, :]
        ak = a[:, k][None, :]
        lk = lo[:, k][:, None]
        uk = hi[:, k][:, None]
        flat = np.abs(dk) < 1e-300
        hit &= ~flat | ((ak >= lk) & (ak <= uk))
        with np.errstate(divide="ignore", invalid="ignore"):
            ta = (lk - ak) / dk
            tb = (uk - ak) / dk
        t0 = np.where(flat, t0, np.maximum(t0, np.minimum(ta, tb)))
        t1 = np.where(flat, t1, np.minimum(t1, np.maximum(ta, tb)))
    hit &= t0 <= t1

    def to_box(p):
        gap = np.maximum(np.maximum(lo[:, None, :] - p[None, :, :], 0.0),
                         p[None, :, :] - hi[:, None, :])
        return np.sqrt(np.einsum("qmk,qmk->qm", gap, gap))

    best = np.minimum(to_box(a), to_box(b))
    for corner in range(2 ** n):
        pick = np.array([(corner >> k) & 1 for k in range(n)], dtype=bool)
        pts = np.where(pick[None, :], hi, lo)
        best = np.minimum(best, point_segment_distances(pts, a, b))
    best[hit] = 0.0
    return best.min(axis=1)


def box_segment_distance(lo, hi, a, b):
    """Exact distance between closed boxes ``[lo, hi]`` (Q, n) and a segment set.

    The distance is zero when a segment meets the box; otherwise the minimum
    is attained between a box corner and a segment or between a segment
    endpoint and the box.
    """
    lo = np.atleast_2d(np.asarray(lo, dtype=float))
    hi = np.atleast_2d(np.asarray(hi, dtype=float))
    out = np.empty(len(lo))
    step = max(1, _CHUNK // (8 * max(1, len(a))))
    for start in range(0, len(lo), step):
        sl = slice(start, start + step)
        out[sl] = _box_segment_block(lo[sl], hi[sl], a, b)
    return out


def _inside_loops(points, a, b):
    """Even-odd crossing test of 2-D points against closed loop segments."""
    points = np.asarray(points, dtype=float)
    out = np.zeros(len(points), dtype=bool)
    step = max(1, _CHUNK // max(1, len(a)))
    ax, ay, bx, by = a[:, 0], a[:, 1], b[:, 0], b[:, 1]
    for start in range(0, len(points), step):
        px = points[start:start + step, 0][:, None]
        py = points[start:start + step, 1][:, None]
        straddle = (ay > py) != (by > py)
        with np.errstate(divide="ignore", invalid="ignore"):
            xcross = ax + (py - ay) * (bx - ax) / (by - ay)
        crossings = straddle & (px < xcross)
        out[start:start + step] = (crossings.sum(axis=1) % 2) == 1
    return out


# -- domain type -------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class GridDomain:
    """Occupancy mask on a dyadic grid plus its exact polygonal boundary.

    Parameters
    ----------
    h : Fraction
        Cell side, a power of two.
    origin : tuple of int
        Absolute cell index of ``mask[0, ..., 0]``.
    mask : ndarray of bool
        Occupancy of the bounding box, shape ``(nx,)`` or ``(nx, ny)``.
    segments : ndarray, shape (M, 2, n)
        Boundary segment endpoints.
    normals : ndarray, shape (M, n)
        Outward unit normals of loop segments, zero rows for cuts.
    """

    h: Fraction
    origin: tuple
    mask: np.ndarray
    segments: np.ndarray
    normals: np.ndarray
    kind: str = "custom"
    flags: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.mask.any():
            raise DomainError("domain has no occupied cells")
        if self.mask.ndim != len(self.origin):
            raise DomainError("origin and mask dimension disagree")
        if self.segments.shape[1:] != (2, self.mask.ndim):
            raise DomainError("segment array must have shape (M, 2, n)")

    @property
    def n(self) -> int:
        return self.mask.ndim

    @property
    def hf(self) -> float:
        return float(self.h)

    @property
    def J(self) -> int:
        """Finest dyadic generation: ``h = 2**-J``."""
        return _dyadic_exponent(self.h)

    @property
    def size(self) -> int:
        return len(self.cells)

    @cached_property
    def cells(self) -> np.ndarray:
        """Absolute integer indices of occupied cells, row-major order."""
        return np.argwhere(self.mask) + np.asarray(self.origin, dtype=np.int64)

    @cached_property
    def centers(self) -> np.ndarray:
        return (self.cells + 0.5) * self.hf

    @cached_property
    def index_grid(self) -> np.ndarray:
        grid = np.full(self.mask.shape, -1, dtype=np.int64)
        grid[self.mask] = np.arange(self.size)
        return grid

    def lookup(self, cells) -> np.ndarray:
        """Occupied-cell indices for absolute cell indices, -1 if unoccupied."""
        rel = np.atleast_2d(np.asarray(cells, dtype=np.int64)) - np.asarray(self.origin)
        ok = np.all((rel >= 0) & (rel < np.asarray(self.mask.shape)), axis=1)
        out = np.full(len(rel), -1, dtype=np.int64)
        if ok.any():
            out[ok] = self.index_grid[tuple(rel[ok].T)]
        return out

    @property
    def seg_a(self) -> np.ndarray:
        return self.segments[:, 0, :]

    @property
    def seg_b(self) -> np.ndarray:
        return self.segments[:, 1, :]

    @cached_property
    def dist(self) -> np.ndarray:
        """Distance from each occupied cell center to the boundary."""
        return distance_field(self)

    @cached_property
    def cell_boundary_distance(self) -> np.ndarray:
        """Distance from each closed cell to the boundary."""
        lo = self.cells * self.hf
        return box_segment_distance(lo, lo + self.hf, self.seg_a, self.seg_b)

    @cached_property
    def collar(self) -> np.ndarray:
        """Cells whose closure meets the boundary; admissible functions vanish there."""
        return self.cell_boundary_distance <= 0.0

    @property
    def interior(self) -> np.ndarray:
        return ~self.collar

    @property
    def cell_volume(self) -> float:
        return self.hf ** self.n

    @property
    def area(self) -> float:
        return self.size * self.cell_volume

    @cached_property
    def diameter(self) -> float:
        pts = self.segments.reshape(-1, self.n)
        return float(np.linalg.norm(pts.max(axis=0) - pts.min(axis=0)))

    @cached_property
    def hash(self) -> str:
        digest = hashlib.sha256()
        digest.update(str(self.h).encode())
        digest.update(np.asarray(self.origin, dtype=np.int64).tobytes())
        digest.update(np.packbits(self.mask).tobytes())
        digest.update(np.ascontiguousarray(self.segments, dtype=float).tobytes())
        return digest.hexdigest()[:16]

    def scaled(self, factor) -> "GridDomain":
        """Same cells and boundary with all lengths multiplied by a power of two."""
        factor = Fraction(factor)
        return GridDomain(h=parse_h(self.h * factor), origin=self.origin, mask=self.mask,
                          segments=self.segments * float(factor), normals=self.normals,
                          kind=self.kind, flags={**self.flags, "scale": str(factor)})


def distance_field(domain: GridDomain) -> np.ndarray:
    """Exact distance from every occupied cell center to the boundary segments."""
    return min_distance_to_segments(domain.centers, domain.seg_a, domain.seg_b)


# -- generators --------------------------------------------------------------


def koch_vertices(level: int, side: float = 1.0, center=(0.0, 0.0)) -> np.ndarray:
    """Counter-clockwise vertices of the Koch snowflake prefractal of ``level``.

    The seed is an equilateral triangle of side ``side`` centred at ``center``
    with one vertex pointing up; every edge gets an outward bump per level.
    """
    radius = side / math.sqrt(3.0)
    angles = np.pi / 2 + 2 * np.pi * np.arange(3) / 3
    pts = radius * np.exp(1j * angles)
    turn = np.exp(-1j * np.pi / 3)
    for _ in range(level):
        p1 = pts
        p2 = np.roll(pts, -1)
        s1 = p1 + (p2 - p1) / 3
        s2 = p1 + 2 * (p2 - p1) / 3
        tip = s1 + (s2 - s1) * turn
        pts = np.stack([p1, s1, tip, s2], axis=1).ravel()
    out = np.column_stack([pts.real, pts.imag])
    return out + np.asarray(center, dtype=float)


def _loop_segments(vertices):
    v = np.asarray(vertices, dtype=float)
    a, b = v, np.roll(v, -1, axis=0)
    area2 = np.sum(a[:, 0] * b[:, 1] - b[:, 0] * a[:, 1])
    if area2 < 0:
        a, b = b[::-1], a[::-1]
    d = b - a
    length = np.linalg.norm(d, axis=1, keepdims=True)
    normals = np.column_stack([d[:, 1], -d[:, 0]]) / length
    return np.stack([a, b], axis=1), normals


def _cut(p, q):
    seg = np.array([[p, q]], dtype=float)
    return seg, np.zeros((1, seg.shape[2]))


@dataclass(frozen=True)
class SlitSnowflakeSpec:
    """Koch prefractal with a slit through the middle of an interior square ``R``.

    ``R = x_R + [-r_half, r_half]^2`` and the slit is
    ``L = x_R + [-r_half / 2, r_half / 2] x {0}`` (half of the side of ``R``).
    Collars are ``L_m = L + B(0, 1 / (2 m))``.
    """

    level: int = 4
    side: float = 3.44
    center: tuple = (Fraction(0), Fraction(0))
    r_half: Fraction = Fraction(3, 4)

    @property
    def x_r(self) -> np.ndarray:
        return np.array([float(c) for c in self.center])

    @property
    def r_side(self) -> float:
        return 2 * float(self.r_half)

    @property
    def r_bounds(self):
        c = self.x_r
        return c - float(self.r_half), c + float(self.r_half)

    @property
    def slit(self):
        c = self.x_r
        half = float(self.r_half) / 2
        return np.array([c[0] - half, c[1]]), np.array([c[0] + half, c[1]])

    def slit_distance(self, points) -> np.ndarray:
        a, b = self.slit
        return point_segment_distances(points, a[None, :], b[None, :])[:, 0]

    def collar_radius(self, m: int) -> float:
        return 1.0 / (2 * m)

    def in_r(self, points) -> np.ndarray:
        lo, hi = self.r_bounds
        pts = np.asarray(points)
        return np.all((pts >= lo) & (pts <= hi), axis=1)

    def features(self):
        """Exact coordinates that must land on grid lines."""
        half = self.r_half / 2
        cx, cy = self.center
        return [cx - half, cx + half, cy, cx - self.r_half, cx + self.r_half,
                cy - self.r_half, cy + self.r_half]

    def to_dict(self) -> dict:
        return {"level": self.level, "side": self.side,
                "center": [str(c) for c in self.center], "r_half": str(self.r_half)}

    @classmethod
    def from_dict(cls, data: dict) -> "SlitSnowflakeSpec":
        return cls(level=int(data.get("level", 4)), side=float(data.get("side", 3.44)),
                   center=tuple(Fraction(str(c)) for c in data.get("center", (0, 0))),
                   r_half=Fraction(str(data.get("r_half", "3/4"))))


def _require_grid_features(values, h: Fraction, what: str):
    values = [Fraction(v) for v in values]
    den = 1
    for v in values:
        if v.denominator & (v.denominator - 1):
            raise DomainError(f"{what} coordinate {v} is not dyadic")
        den = max(den, v.denominator)
    min_h = Fraction(1, den)
    if h > min_h:
        raise DomainError(f"h = {h} does not resolve the {what}; need h <= {min_h}", min_h)


def _normalize_spec(spec):
    if isinstance(spec, str):
        return {"kind": spec}
    if isinstance(spec, SlitSnowflakeSpec):
        return {"kind": "koch_minus_slit", **spec.to_dict()}
    return dict(spec)


def build_domain(spec, h, *, min_cells_per_edge: float = 1.0) -> GridDomain:
    """Rasterize a domain descriptor at cell size ``h``.

    Parameters
    ----------
    spec : str, dict or SlitSnowflakeSpec
        One of ``interval``, ``square``, ``disk``, ``square_minus_slit``,
        ``punctured_square``, ``koch`` (keys ``level``, ``side``) or
        ``koch_minus_slit`` (keys of :class:`SlitSnowflakeSpec`).
    h : str, Fraction or float
        Power-of-two cell size.
    min_cells_per_edge : float
        Cells required along the shortest prefractal edge.

    Raises
    ------
    DomainError
        If ``h`` is too coarse for a feature of the domain; ``min_h`` holds
        the coarsest admissible cell size.
    """
    h = parse_h(h)
    spec = _normalize_spec(spec)
    kind = spec.get("kind")
    hf = float(h)
    flags = {"kind": kind, **{k: v for k, v in spec.items() if k != "kind"}}

    if kind == "interval":
        _require_grid_features([0, 1], h, "interval end")
        segments = np.array([[[0.0], [0.0]], [[1.0], [1.0]]])
        normals = np.array([[-1.0], [1.0]])
        count = int(1 / h)
        return GridDomain(h, (0,), np.ones(count, dtype=bool), segments, normals, kind, flags)

    if kind in ("square", "square_minus_slit", "punctured_square"):
        _require_grid_features([0, 1], h, "square side")
        segments, normals = _loop_segments([(0, 0), (1, 0), (1, 1), (0, 1)])
        if kind == "square_minus_slit":
            y = Fraction(spec.get("y", Fraction(1, 2)))
            x0, x1 = Fraction(spec.get("x0", Fraction(1, 4))), Fraction(spec.get("x1", Fraction(3, 4)))
            _require_grid_features([x0, x1, y], h, "slit")
            cut, cn = _cut((float(x0), float(y)), (float(x1), float(y)))
            segments, normals = np.concatenate([segments, cut]), np.concatenate([normals, cn])
        elif kind == "punctured_square":
            px, py = (Fraction(c) for c in spec.get("point", (Fraction(1, 2), Fraction(1, 2))))
            _require_grid_features([px, py], h, "puncture")
            cut, cn = _cut((float(px), float(py)), (float(px), float(py)))
            segments, normals = np.concatenate([segments, cut]), np.concatenate([normals, cn])
        count = int(1 / h)
        mask = np.ones((count, count), dtype=bool)
        return GridDomain(h, (0, 0), mask, segments, normals, kind, flags)

    if kind == "disk":
        nseg = int(spec.get("segments", 512))
        theta = 2 * np.pi * np.arange(nseg) / nseg
        verts = 0.5 + 0.5 * np.column_stack([np.cos(theta), np.sin(theta)])
        segments, normals = _loop_segments(verts)
        if hf > 1 / 8:
            raise DomainError(f"h = {h} does not resolve the disk; need h <= 1/8", Fraction(1, 8))
        return _rasterize(h, segments, normals, kind, flags)

    if kind in ("koch", "koch_minus_slit"):
        if kind == "koch_minus_slit":
            slit_spec = SlitSnowflakeSpec.from_dict(spec)
            level, side, center = slit_spec.level, slit_spec.side, slit_spec.x_r
            flags = {"kind": kind, **slit_spec.to_dict()}
        else:
            level = int(spec.get("level", 4))
            side = float(spec.get("side", 1.0))
            center = tuple(float(c) for c in spec.get("center", (0.0, 0.0)))
        edge = side / 3 ** level
        if hf * min_cells_per_edge > edge:
            coarse = Fraction(1, 2 ** math.ceil(math.log2(min_cells_per_edge / edge)))
            raise DomainError(f"h = {h} does not resolve level-{level} edges of length "
                              f"{edge:.4g}; need h <= {coarse}", coarse)
        segments, normals = _loop_segments(koch_vertices(level, side, center))
        if kind == "koch_minus_slit":
            _require_grid_features(slit_spec.features(), h, "slit")
            a, b = slit_spec.slit
            cut, cn = _cut(a, b)
            lo, hi = slit_spec.r_bounds
            if box_segment_distance(lo, hi, segments[:, 0], segments[:, 1])[0] <= 0 or \
                    not _inside_loops(np.array([slit_spec.x_r]), segments[:, 0], segments[:, 1])[0]:
                raise DomainError("reference square R is not strictly inside the prefractal")
            segments, normals = np.concatenate([segments, cut]), np.concatenate([normals, cn])
        return _rasterize(h, segments, normals, kind, flags)

    raise DomainError(f"unknown domain kind {kind!r}")


def _rasterize(h, segments, normals, kind, flags) -> GridDomain:
    hf = float(h)
    loop = np.any(normals != 0, axis=1)
    pts = segments[loop].reshape(-1, 2)
    lo = np.floor(pts.min(axis=0) / hf).astype(np.int64)
    hi = np.ceil(pts.max(axis=0) / hf).astype(np.int64)
    ii, jj = np.meshgrid(np.arange(lo[0], hi[0]), np.arange(lo[1], hi[1]), indexing="ij")
    centers = (np.column_stack([ii.ravel(), jj.ravel()]) + 0.5) * hf
    inside = _inside_loops(centers, segments[loop, 0], segments[loop, 1])
    mask = inside.reshape(ii.shape)
    rows = np.flatnonzero(mask.any(axis=1))
    cols = np.flatnonzero(mask.any(axis=0))
    mask = mask[rows[0]:rows[-1] + 1, cols[0]:cols[-1] + 1]
    origin = (int(lo[0] + rows[0]), int(lo[1] + cols[0]))
    return GridDomain(h, origin, np.ascontiguousarray(mask), segments, normals, kind, flags)


# -- file format ---------------------------------------------------------------


def _rle(row) -> list:
    runs, current, count = [], False, 0
    for v in row:
        v = bool(v)
        if v == current:
            count += 1
        else:
            runs.append(count)
            current, count = v, 1
    runs.append(count)
    return runs


def _unrle(runs, length) -> np.ndarray:
    row = np.zeros(length, dtype=bool)
    pos, value = 0, False
    for count in runs:
        row[pos:pos + count] = value
        pos += count
        value = not value
    return row


def domain_to_json(domain: GridDomain) -> dict:
    """Domain document: exact ``h``, lattice origin, row RLE mask, boundary."""
    rows = domain.mask if domain.n == 2 else domain.mask[None, :]
    boundary = domain.segments.reshape(len(domain.segments), -1).tolist()
    return {
        "h": str(domain.h),
        "origin": list(domain.origin),
        "shape": list(domain.mask.shape),
        "mask_rle": [_rle(r) for r in rows],
        "boundary": boundary,
        "normals": domain.normals.tolist(),
        "flags": {k: (str(v) if isinstance(v, Fraction) else v) for k, v in domain.flags.items()},
        "kind": domain.kind,
        "domain_hash": domain.hash,
    }


def domain_from_json(doc) -> GridDomain:
    if isinstance(doc, (str, bytes)):
        doc = json.loads(doc)
    shape = tuple(doc["shape"])
    n = len(shape)
    width = shape[-1]
    rows = np.array([_unrle(r, width) for r in doc["mask_rle"]])
    mask = rows.reshape(shape)
    segments = np.asarray(doc["boundary"], dtype=float).reshape(-1, 2, n)
    normals = np.asarray(doc["normals"], dtype=float).reshape(-1, n)
    domain = GridDomain(parse_h(doc["h"]), tuple(doc["origin"]), mask, segments, normals,
                        doc.get("kind", "custom"), dict(doc.get("flags", {})))
    if "domain_hash" in doc and doc["domain_hash"] != domain.hash:
        raise DomainError("domain hash mismatch")
    return domain
