"""Discrete Gagliardo energies, Hardy and exterior weights, test functions.

The p-th power of the seminorm is approximated by the cell-center quadrature

    |u|^p  ~  sum_{i != j} |u_i - u_j|^p h^(2n) / |x_i - x_j|^(n + sp)

with the diagonal omitted.  Grid functions live on occupied cells and are
implicitly zero elsewhere, which is exactly their zero extension.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.fft as sfft
from scipy import special

from . import _kernels
from .geometry import GridDomain
from .params import EnergyParams
from .whitney import DyadicCube, STAR

__all__ = [
    "GridFunction",
    "WeightField",
    "EnergyForm",
    "PairOperator",
    "HARDY",
    "EXTERIOR",
    "seminorm_p",
    "seminorm_zero_extended_p",
    "weight_field",
    "exterior_weight",
    "weighted_mass",
    "whitney_cutoff",
    "clamp01",
]

HARDY = "HARDY"
EXTERIOR = "EXTERIOR"


@dataclass(eq=False)
class GridFunction:
    """Values on the occupied cells of ``domain`` in row-major cell order."""

    domain: GridDomain
    values: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float).reshape(-1)
        if self.values.shape != (self.domain.size,):
            raise ValueError(f"expected {self.domain.size} values, got {self.values.shape}")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("grid function values must be finite")

    @classmethod
    def zeros(cls, domain):
        return cls(domain, np.zeros(domain.size))

    @classmethod
    def indicator(cls, domain, cells):
        values = np.zeros(domain.size)
        values[np.asarray(cells, dtype=np.int64)] = 1.0
        return cls(domain, values)

    @classmethod
    def sample(cls, domain, func):
        """Evaluate a function of the cell-center array (N, n) on the grid."""
        return cls(domain, func(domain.centers))

    def with_values(self, values):
        return GridFunction(self.domain, values)

    def __mul__(self, c):
        return self.with_values(c * self.values)

    __rmul__ = __mul__

    def __add__(self, other):
        return self.with_values(self.values + other.values)

    def __sub__(self, other):
        return self.with_values(self.values - other.values)

    def to_json(self) -> dict:
        return {"domain_hash": self.domain.hash, "values": self.values.tolist()}

    @classmethod
    def from_json(cls, domain, doc):
        if isinstance(doc, (str, bytes)):
            doc = json.loads(doc)
        if doc["domain_hash"] != domain.hash:
            raise ValueError("grid function belongs to a different domain")
        return cls(domain, np.asarray(doc["values"], dtype=float))


@dataclass(eq=False)
class WeightField:
    """Per-cell weight with a certified enclosure ``lower <= true <= upper``."""

    kind: str
    values: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    params: EnergyParams

    @property
    def width(self) -> float:
        return float(np.max(self.upper - self.lower))


class EnergyForm:
    """Pair quadrature of the Gagliardo energy on one domain.

    Parameters
    ----------
    params : EnergyParams
    domain : GridDomain
    summation : {"compensated", "fixed"}
        Row sums with Neumaier compensation reduced exactly, or plain
        left-to-right accumulation.
    """

    def __init__(self, params: EnergyParams, domain: GridDomain, summation: str = "compensated"):
        if params.n != domain.n:
            raise ValueError(f"params are for n = {params.n} but the domain has n = {domain.n}")
        if summation not in ("compensated", "fixed"):
            raise ValueError(f"unknown summation mode {summation!r}")
        self.params = params
        self.domain = domain
        self.summation = summation

    @cached_property
    def table(self) -> np.ndarray:
        """Kernel weight ``h^(2n) |offset h|^-(n+sp)`` by absolute lattice offset."""
        h = self.domain.hf
        n = self.params.n
        shape = self.domain.mask.shape if n == 2 else (self.domain.mask.shape[0], 1)
        a = np.arange(shape[0])[:, None]
        b = np.arange(shape[1])[None, :]
        r = h * np.sqrt(a * a + b * b)
        with np.errstate(divide="ignore"):
            t = h ** (2 * n) * r ** (-self.params.kernel_exponent)
        t[0, 0] = 0.0
        return np.ascontiguousarray(t)

    @cached_property
    def coords(self):
        cells = self.domain.cells - np.asarray(self.domain.origin)
        ci = np.ascontiguousarray(cells[:, 0])
        cj = np.ascontiguousarray(cells[:, 1]) if self.params.n == 2 else np.zeros_like(ci)
        return ci, cj

    @cached_property
    def operator(self) -> "PairOperator":
        return PairOperator(self)

    def energy(self, values, p=None) -> float:
        p = self.params.p if p is None else p
        ci, cj = self.coords
        rows = _kernels.pair_rowsums(ci, cj, np.ascontiguousarray(values, dtype=float),
                                     self.table, float(p), self.summation == "compensated")
        if self.summation == "compensated":
            return 2.0 * math.fsum(rows)
        total = 0.0
        for r in rows:
            total += r
        return 2.0 * total

    def energy_grad(self, values, grad):
        ci, cj = self.coords
        return _kernels.pair_energy_grad(ci, cj, values, self.table, float(self.params.p), grad)

    def hessian(self, values, eta=1e-8) -> np.ndarray:
        """Dense Hessian of the energy, regularized at coincident values."""
        ci, cj = self.coords
        hess = np.empty((len(values), len(values)))
        _kernels.pair_hessian(ci, cj, np.ascontiguousarray(values, dtype=float), self.table,
                              float(self.params.p), float(eta), hess)
        return hess

    def bilinear(self, u, v) -> float:
        ci, cj = self.coords
        return _kernels.pair_bilinear(ci, cj, np.ascontiguousarray(u, dtype=float),
                                      np.ascontiguousarray(v, dtype=float), self.table)

    def scaled(self, factor) -> "EnergyForm":
        return EnergyForm(self.params, self.domain.scaled(factor), self.summation)


class PairOperator:
    """Matrix-free ``W v`` and ``L v = diag(W 1) v - W v`` via zero-padded FFT.

    ``W`` is the dense kernel matrix restricted to occupied cells (zero
    diagonal), so ``sum_{i != j} w_ij (u_i - u_j)^2 = 2 u . L u``.
    """

    def __init__(self, form: EnergyForm):
        self.form = form
        domain = form.domain
        self.mask = domain.mask if domain.n == 2 else domain.mask[:, None]
        table = form.table
        nx, ny = self.mask.shape
        self.shape = (sfft.next_fast_len(2 * nx - 1, real=True),
                      sfft.next_fast_len(2 * ny - 1, real=True) if ny > 1 else 1)
        kernel = np.zeros(self.shape)
        ia = np.arange(-(nx - 1), nx)
        ja = np.arange(-(ny - 1), ny)
        kernel[np.ix_(ia % self.shape[0], ja % self.shape[1])] = table[np.abs(ia)][:, np.abs(ja)]
        self._khat = sfft.rfftn(kernel)
        self.degree = self.apply_w(np.ones(domain.size))

    def apply_w(self, v) -> np.ndarray:
        grid = np.zeros(self.mask.shape)
        grid[self.mask] = v
        conv = sfft.irfftn(self._khat * sfft.rfftn(grid, s=self.shape), s=self.shape)
        return conv[:self.mask.shape[0], :self.mask.shape[1]][self.mask]

    def apply_l(self, v) -> np.ndarray:
        return self.degree * v - self.apply_w(v)

    def energy(self, u) -> float:
        return 2.0 * float(np.dot(u, self.apply_l(u)))


def _values(u):
    return u.values if isinstance(u, GridFunction) else np.asarray(u, dtype=float)


def seminorm_p(u: GridFunction, form: EnergyForm) -> float:
    """p-th power of the discrete Gagliardo seminorm of ``u`` on the domain."""
    if isinstance(u, GridFunction) and u.domain is not form.domain and u.domain.hash != form.domain.hash:
        raise ValueError("grid function and energy form live on different domains")
    return form.energy(_values(u))


def seminorm_zero_extended_p(u: GridFunction, form: EnergyForm, weight: WeightField | None = None):
    """Bracket ``(lo, hi)`` for the p-th power seminorm of the zero extension over R^n.

    Uses ``|E u|^p = |u|^p_G + 2 sum_i |u_i|^p omega_i h^n`` with ``omega`` the
    exterior weight enclosure.
    """
    if weight is None:
        weight = weight_field(form.domain, form.params, EXTERIOR)
    inner = seminorm_p(u, form)
    lo, hi = weighted_mass(u, weight, form.params.p, bracket=True)
    return inner + 2.0 * lo, inner + 2.0 * hi


def _betainc_integral(phi, sp):
    """``int_0^phi cos(t)^sp dt`` for ``|phi| <= pi/2``."""
    b = 0.5 * (sp + 1.0)
    full = 0.5 * special.beta(0.5, b)
    return np.sign(phi) * full * special.betainc(0.5, b, np.sin(phi) ** 2)


def exterior_weight(domain: GridDomain, params: EnergyParams, points=None):
    """``omega(x) = int_{R^n minus G} |x - y|^-(n+sp) dy`` at interior points.

    The divergence theorem turns the exterior volume integral into a sum over
    loop segments of ``(1/sp) int (y - x) . nu |y - x|^-(n+sp) dS(y)``, which is
    integrated in closed form (incomplete beta).  Cuts have zero normal and
    contribute nothing, as a null set should.  Returns ``(value, abs_error)``.
    """
    sp = params.sp
    x = domain.centers if points is None else np.atleast_2d(np.asarray(points, dtype=float))
    loop = np.any(domain.normals != 0, axis=1)
    a = domain.seg_a[loop]
    b = domain.seg_b[loop]
    nu = domain.normals[loop]
    value = np.zeros(len(x))
    scale = np.zeros(len(x))
    if domain.n == 1:
        for k in range(len(a)):
            y = a[k, 0]
            t = (y - x[:, 0]) * nu[k, 0]
            contrib = np.sign(t) * np.abs(t) ** (-sp) / sp
            value += contrib
            scale += np.abs(contrib)
        return value, 64 * np.finfo(float).eps * scale
    tangent = b - a
    length = np.linalg.norm(tangent, axis=1)
    tangent = tangent / length[:, None]
    step = max(1, 2_000_000 // max(1, len(a)))
    for start in range(0, len(x), step):
        xs = x[start:start + step]
        rel_a = a[None, :, :] - xs[:, None, :]
        rel_b = b[None, :, :] - xs[:, None, :]
        t = np.einsum("qmk,mk->qm", rel_a, nu)
        ta = np.einsum("qmk,mk->qm", rel_a, tangent)
        tb = np.einsum("qmk,mk->qm", rel_b, tangent)
        at = np.abs(t)
        live = at > 0
        safe = np.where(live, at, 1.0)
        phi_a = np.arctan2(ta, safe)
        phi_b = np.arctan2(tb, safe)
        span = _betainc_integral(phi_b, sp) - _betainc_integral(phi_a, sp)
        contrib = np.where(live, np.sign(t) * safe ** (-sp) * span / sp, 0.0)
        value[start:start + step] = contrib.sum(axis=1)
        scale[start:start + step] = np.abs(contrib).sum(axis=1)
    return value, 1e-13 * scale + 64 * np.finfo(float).eps * np.abs(value)


def weight_field(domain: GridDomain, params: EnergyParams, kind: str = HARDY) -> WeightField:
    """Hardy weight ``dist^-sp`` or exterior weight ``omega`` on occupied cells."""
    if kind == HARDY:
        values = domain.dist ** (-params.sp)
        return WeightField(HARDY, values, values, values, params)
    if kind == EXTERIOR:
        values, err = exterior_weight(domain, params)
        lower = np.maximum(values - err, 0.0)
        return WeightField(EXTERIOR, values, lower, values + err, params)
    raise ValueError(f"unknown weight kind {kind!r}")


def weighted_mass(u, w: WeightField, p=None, bracket: bool = False):
    """``sum_i |u_i|^p w_i h^n``; a ``(lo, hi)`` pair when ``bracket`` is set."""
    if not isinstance(u, GridFunction):
        raise TypeError("weighted_mass needs a GridFunction")
    p = w.params.p if p is None else p
    vals = np.abs(u.values) ** p
    vol = u.domain.cell_volume
    if bracket:
        return (math.fsum(vals * w.lower) * vol, math.fsum(vals * w.upper) * vol)
    return math.fsum(vals * w.values) * vol


def whitney_cutoff(cube: DyadicCube, domain: GridDomain) -> GridFunction:
    """Ramp that is 1 on ``Q``, 0 off ``Q* = (17/16) Q``, linear in sup-distance.

    The collar has width ``side / 32``; when that is at most half a cell the
    ramp cannot be resolved and the function is the indicator of ``Q``
    (``meta["degenerate"]`` is then set).
    """
    width = (STAR - 1.0) / 2.0 * cube.side
    gap = np.maximum(np.maximum(cube.lo - domain.centers, domain.centers - cube.hi), 0.0)
    sup = gap.max(axis=1)
    values = np.clip(1.0 - sup / width, 0.0, 1.0)
    degenerate = width <= 0.5 * domain.hf
    return GridFunction(domain, values, meta={"degenerate": bool(degenerate),
                                              "lipschitz": 1.0 / width})


def clamp01(u: GridFunction) -> GridFunction:
    """Pointwise truncation to ``[0, 1]``; never increases the energy."""
    return GridFunction(u.domain, np.clip(u.values, 0.0, 1.0), meta=dict(u.meta))
