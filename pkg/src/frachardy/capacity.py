"""Variational (s,p)-capacity of cell sets, with admissible test families.

Admissible functions vanish on the collar (cells whose closure meets the
boundary), which is the grid stand-in for compact support in the domain.
Without that condition the constant 1 would be admissible and every
capacity would vanish.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg

from .energy import EnergyForm, GridFunction, seminorm_p
from .geometry import DomainError, GridDomain, SlitSnowflakeSpec, box_segment_distance
from .params import EnergyParams
from .whitney import WhitneyDecomposition

__all__ = [
    "CompactCellSet",
    "CapacityResult",
    "SolverConfig",
    "solve_capacity",
    "capacity_upper_bound",
    "family_energies",
    "check_admissible",
    "boundary_ramp_family",
    "slit_test_family",
    "pcg",
]


@dataclass(eq=False)
class CompactCellSet:
    """A nonempty union of occupied cells kept away from the boundary."""

    domain: GridDomain
    cells: np.ndarray
    label: str = ""

    def __post_init__(self):
        self.cells = np.unique(np.asarray(self.cells, dtype=np.int64).reshape(-1))
        if len(self.cells) == 0:
            raise ValueError("compact set is empty")
        if self.cells.min() < 0 or self.cells.max() >= self.domain.size:
            raise ValueError("compact set refers to unoccupied cells")
        if not self.margin > 0:
            bad = self.cells[self.domain.collar[self.cells]][0]
            raise ValueError(f"compact set touches the boundary at cell {int(bad)}")

    @property
    def margin(self) -> float:
        return float(self.domain.cell_boundary_distance[self.cells].min())

    @property
    def volume(self) -> float:
        return len(self.cells) * self.domain.cell_volume

    def indicator(self) -> GridFunction:
        return GridFunction.indicator(self.domain, self.cells)

    def __len__(self):
        return len(self.cells)

    def __or__(self, other):
        return CompactCellSet(self.domain, np.concatenate([self.cells, other.cells]))

    def issubset(self, other) -> bool:
        return bool(np.isin(self.cells, other.cells).all())

    @classmethod
    def from_cubes(cls, decomposition: WhitneyDecomposition, cube_ids, label=""):
        ids = list(cube_ids)
        cells = np.concatenate([decomposition.members[i] for i in ids]) if ids else []
        return cls(decomposition.domain, cells, label)


@dataclass(eq=False)
class CapacityResult:
    value: float
    witness: GridFunction
    gap: float
    iterations: int
    status: str
    residual: float = float("nan")
    upper_bound_only: bool = False
    meta: dict = field(default_factory=dict)

    def to_json(self, witness_ref=None) -> dict:
        return {"value": self.value, "gap": self.gap, "status": self.status,
                "iterations": self.iterations, "witness_ref": witness_ref}


@dataclass(frozen=True)
class SolverConfig:
    rtol: float = 1e-9
    energy_tol: float = 1e-10
    window: int = 20
    maxiter: int = 20000
    dense_limit: int = 4096
    newton_maxiter: int = 200


def pcg(apply, b, diag, x0=None, rtol=1e-9, maxiter=5000):
    """Jacobi-preconditioned conjugate gradients; returns ``(x, iters, rel_res, r)``."""
    x = np.zeros_like(b) if x0 is None else x0.copy()
    r = b - apply(x) if x0 is not None else b.copy()
    bnorm = np.linalg.norm(b)
    if bnorm == 0:
        return x, 0, 0.0, r
    z = r / diag
    d = z.copy()
    rz = r @ z
    for it in range(1, maxiter + 1):
        q = apply(d)
        alpha = rz / (d @ q)
        x += alpha * d
        r -= alpha * q
        rel = np.linalg.norm(r) / bnorm
        if rel <= rtol:
            return x, it, rel, r
        z = r / diag
        rz_new = r @ z
        d = z + (rz_new / rz) * d
        rz = rz_new
    return x, maxiter, np.linalg.norm(r) / bnorm, r


def _solve_quadratic(K: CompactCellSet, form: EnergyForm, config: SolverConfig):
    domain = form.domain
    op = form.operator
    fixed_one = np.zeros(domain.size, dtype=bool)
    fixed_one[K.cells] = True
    free = ~(fixed_one | domain.collar)
    u = fixed_one.astype(float)
    if not free.any():
        return u, 0, 0.0, 0.0, "converged"
    b = op.apply_w(u)[free]

    def apply(v):
        full = np.zeros(domain.size)
        full[free] = v
        return op.apply_l(full)[free]

    diag = op.degree[free]
    x, iters, rel, r = pcg(apply, b, diag, rtol=config.rtol, maxiter=config.maxiter)
    # Gershgorin: the restricted Laplacian is diagonally dominant by the
    # interaction of each free cell with the fixed cells.
    inner = op.apply_w(free.astype(float))[free]
    lam = float(np.min(diag - inner))
    gap = 2.0 * float(r @ r) / lam if lam > 0 else float("inf")
    u[free] = x
    status = "converged" if rel <= config.rtol else "max-iter"
    return u, iters, rel, gap, status


def _spg(form: EnergyForm, u0, lo, hi, config: SolverConfig):
    """Projected gradient with Barzilai-Borwein steps and nonmonotone backtracking."""
    u = np.clip(u0, lo, hi)
    g = np.empty_like(u)
    e = form.energy_grad(u, g)
    gmax = np.max(np.abs(g[lo < hi])) if np.any(lo < hi) else 0.0
    if gmax == 0.0:
        return u, e, 0, 0.0, "converged"
    alpha = 1.0 / gmax
    history = [e]
    best = [e]
    best_u = u.copy()
    gn = np.empty_like(u)
    status = "max-iter"
    it = 0
    for it in range(1, config.maxiter + 1):
        d = np.clip(u - alpha * g, lo, hi) - u
        gd = float(g @ d)
        if not np.any(d) or gd >= 0:
            status = "converged"
            break
        ref = max(history[-10:])
        lam = 1.0
        while True:
            un = u + lam * d
            en = form.energy_grad(un, gn)
            if en <= ref + 1e-4 * lam * gd or lam < 1e-14:
                break
            lam *= 0.5
        s = un - u
        y = gn - g
        sy = float(s @ y)
        alpha = min(max(float(s @ s) / sy, 1e-14), 1e14) if sy > 0 else 1e3 * alpha
        u, e = un, en
        g, gn = gn, g
        history.append(e)
        if e < best[-1]:
            best_u = u.copy()
        best.append(min(e, best[-1]))
        if it >= config.window:
            old = best[-config.window - 1]
            if old - best[-1] <= config.energy_tol * max(best[-1], 1e-300):
                status = "converged"
                break
    stall = best[-config.window - 1] - best[-1] if len(best) > config.window else best[0] - best[-1]
    return best_u, best[-1], it, float(stall), status


def _newton(form: EnergyForm, u0, lo, hi, config: SolverConfig):
    """Projected Newton steps on the free cells with a dense regularized Hessian.

    Cells sitting on a bound with the gradient pushing outward are frozen for
    the step; trial points are projected back onto the box.  Stops when the
    Newton decrement or the achieved relative decrease drops below
    ``config.energy_tol``.
    """
    u = np.clip(u0, lo, hi)
    g = np.empty_like(u)
    gn = np.empty_like(u)
    e = form.energy_grad(u, g)
    movable = lo < hi
    status, stall, it = "max-iter", float("inf"), 0
    for it in range(1, config.newton_maxiter + 1):
        act = movable & ~(((u <= lo) & (g > 0)) | ((u >= hi) & (g < 0)))
        if not act.any():
            status, stall = "converged", 0.0
            break
        hess = form.hessian(u)[np.ix_(act, act)]
        hess[np.diag_indices_from(hess)] += 1e-12 * np.max(np.diag(hess))
        try:
            delta = -linalg.cho_solve(linalg.cho_factor(hess), g[act])
        except linalg.LinAlgError:
            delta = -g[act] / np.diag(hess)
        decrement = float(-g[act] @ delta)
        if decrement <= config.energy_tol * max(e, 1e-300):
            status, stall = "converged", 0.5 * max(decrement, 0.0)
            break
        t = 1.0
        while True:
            un = u.copy()
            un[act] = np.clip(u[act] + t * delta, lo[act], hi[act])
            en = form.energy_grad(un, gn)
            if en <= e + 1e-4 * float(g @ (un - u)) or t < 1e-10:
                break
            t *= 0.5
        drop = e - en
        if drop <= 0:
            status, stall = "converged", 0.5 * decrement
            break
        u, e = un, en
        g, gn = gn, g
        if drop <= config.energy_tol * e:
            status, stall = "converged", drop
            break
    return u, e, it, float(stall), status


def _minimize(form, u0, lo, hi, config):
    if np.count_nonzero(lo < hi) <= config.dense_limit:
        return _newton(form, u0, lo, hi, config)
    return _spg(form, u0, lo, hi, config)


def _bounds(K: CompactCellSet):
    domain = K.domain
    lo = np.zeros(domain.size)
    hi = np.ones(domain.size)
    lo[K.cells] = 1.0
    hi[domain.collar] = 0.0
    return lo, hi


def solve_capacity(K: CompactCellSet, form: EnergyForm, config: SolverConfig | None = None,
                   method: str = "auto") -> CapacityResult:
    """Minimize the discrete energy over ``u = 1`` on ``K``, ``u = 0`` on the collar.

    ``p = 2`` (``method="auto"`` or ``"quadratic"``) solves the linear system of
    the constrained quadratic form by preconditioned CG on the FFT operator;
    the certified gap is ``2 |r|^2 / lambda`` with ``lambda`` a Gershgorin lower
    bound.  Otherwise (or with ``method="projected"``) the convex energy is
    minimized over ``{chi_K <= u <= 1}`` by projected gradient, once from
    ``chi_K`` and once from the ``p = 2`` minimizer; the spread of the two
    values plus the final stagnation is reported as the gap.
    """
    config = config or SolverConfig()
    params = form.params
    if K.domain is not form.domain and K.domain.hash != form.domain.hash:
        raise ValueError("compact set and energy form live on different domains")
    if method not in ("auto", "quadratic", "projected"):
        raise ValueError(f"unknown method {method!r}")
    quadratic = params.p == 2.0 and method != "projected"
    if quadratic:
        u, iters, rel, gap, status = _solve_quadratic(K, form, config)
        if u.min() < -1e-6 or u.max() > 1 + 1e-6:
            raise RuntimeError("maximum principle violated by the quadratic minimizer")
        witness = GridFunction(form.domain, np.clip(u, 0.0, 1.0))
        value = seminorm_p(witness, form)
        return CapacityResult(value, witness, gap, iters, status, residual=rel,
                              upper_bound_only=status != "converged",
                              meta={"method": "quadratic"})

    params.require_convex()
    lo, hi = _bounds(K)
    cold, e_cold, it_cold, stall_cold, st_cold = _minimize(form, lo.copy(), lo, hi, config)
    seed_form = form if params.p == 2.0 else EnergyForm(EnergyParams(params.s, 2.0, params.n),
                                                         form.domain, form.summation)
    seed, *_ = _solve_quadratic(K, seed_form, config)
    warm, e_warm, it_warm, stall_warm, st_warm = _minimize(form, seed, lo, hi, config)
    witness_u = cold if e_cold <= e_warm else warm
    witness = GridFunction(form.domain, witness_u)
    value = seminorm_p(witness, form)
    gap = abs(e_cold - e_warm) + max(stall_cold, stall_warm)
    status = "converged" if st_cold == st_warm == "converged" else "max-iter"
    return CapacityResult(value, witness, gap, it_cold + it_warm, status,
                          upper_bound_only=status != "converged",
                          meta={"method": "projected", "cold": e_cold, "warm": e_warm})


def check_admissible(K: CompactCellSet, u: GridFunction, tol: float = 1e-9):
    """Raise if ``u`` is below 1 on ``K`` or nonzero on the collar."""
    vals = u.values
    low = np.flatnonzero(vals[K.cells] < 1.0 - tol)
    if len(low):
        cell = int(K.cells[low[0]])
        raise ValueError(f"test function is {vals[cell]:.6g} < 1 at cell {cell} of K")
    leak = np.flatnonzero(K.domain.collar & (np.abs(vals) > tol))
    if len(leak):
        raise ValueError(f"test function is nonzero on the boundary collar at cell {int(leak[0])}")


def family_energies(K: CompactCellSet, family, form: EnergyForm, method: str = "direct") -> list:
    """Energies of admissible test functions for ``K``.

    ``method="operator"`` evaluates ``2 u . L u`` with the FFT operator, which
    is only valid for ``p = 2`` but scales to grids where the pair sum is
    too slow.
    """
    if method == "operator" and form.params.p != 2.0:
        raise ValueError("operator energies need p = 2")
    out = []
    for u in family:
        check_admissible(K, u)
        out.append(seminorm_p(u, form) if method == "direct" else form.operator.energy(u.values))
    return out


def capacity_upper_bound(K: CompactCellSet, family, form: EnergyForm, method: str = "direct") -> float:
    """Smallest energy over an explicit admissible family for ``K``."""
    energies = family_energies(K, family, form, method)
    if not energies:
        raise ValueError("empty test family")
    return min(energies)


def boundary_ramp_family(domain: GridDomain, widths) -> list:
    """``u_eps = clip((dist - h sqrt(n)/2) / eps, 0, 1)`` for each width ``eps``.

    Equal to 1 away from an ``eps``-layer at the boundary and 0 on the collar;
    for ``sp < 1`` their energies vanish as ``eps`` shrinks.
    """
    offset = 0.5 * math.sqrt(domain.n) * domain.hf
    out = []
    for eps in widths:
        vals = np.clip((domain.dist - offset) / eps, 0.0, 1.0)
        out.append(GridFunction(domain, vals, meta={"eps": float(eps)}))
    return out


def slit_test_family(spec: SlitSnowflakeSpec, m: int, domain: GridDomain) -> GridFunction:
    """``u_m = v - w_m`` for the slit snowflake.

    ``v`` equals 1 on ``R`` and ramps linearly to 0 over half the gap between
    ``R`` and the prefractal boundary; ``w_m`` equals 1 on ``L_{2m}`` and ramps
    with slope ``4 m`` to 0 outside ``L_m``.
    """
    h = domain.hf
    if h / 2 > 1.0 / (4 * m):
        raise DomainError(f"h = {domain.h} does not resolve the collar 1/(4m) for m = {m}")
    if 1.0 / (2 * m) >= float(spec.r_half) / 2:
        raise ValueError(f"L_m is not compactly inside R for m = {m}")
    loop = np.any(domain.normals != 0, axis=1)
    r_lo, r_hi = spec.r_bounds
    gap = box_segment_distance(r_lo, r_hi, domain.seg_a[loop], domain.seg_b[loop])[0]
    ramp = gap / 2
    x = domain.centers
    out_r = np.maximum(np.maximum(r_lo - x, x - r_hi), 0.0)
    v = np.clip(1.0 - np.linalg.norm(out_r, axis=1) / ramp, 0.0, 1.0)
    dl = spec.slit_distance(x)
    w = np.clip(2.0 - 4.0 * m * dl, 0.0, 1.0)
    u = v - w
    in_r = spec.in_r(x)
    outside_collar = dl >= 1.0 / (2 * m)
    if np.any(u[in_r & outside_collar] < 1.0):
        raise AssertionError("u_m < 1 on R minus L_m")
    return GridFunction(domain, u, meta={"m": m, "v": v, "w": w, "slope": 4.0 * m})
