"""Compiled pair loops over occupied cells.

Kernel weights are looked up in a table indexed by the absolute integer
offset between two cells, so no power of a distance is evaluated inside the
loops.  Row sums are accumulated left to right with Neumaier compensation and
returned per row; callers reduce them in a fixed order.
"""

import math

import numpy as np
from numba import njit


@njit(cache=True, inline="always")
def _abspow(d, p):
    if p == 2.0:
        return d * d
    if p == 1.0:
        return d
    if p == 3.0:
        return d * d * d
    if p == 1.5:
        return d * math.sqrt(d)
    if p == 4.0:
        return (d * d) * (d * d)
    return d ** p


@njit(cache=True)
def pair_rowsums(ci, cj, u, table, p, compensated):
    """Per-row sums of ``table[|di|, |dj|] * |u_i - u_j|^p`` over ``j > i``."""
    n = u.shape[0]
    out = np.zeros(n)
    for i in range(n):
        s = 0.0
        c = 0.0
        ui = u[i]
        a = ci[i]
        b = cj[i]
        for j in range(i + 1, n):
            d = abs(ui - u[j])
            if d == 0.0:
                continue
            t = table[abs(a - ci[j]), abs(b - cj[j])] * _abspow(d, p)
            if compensated:
                x = s + t
                if abs(s) >= abs(t):
                    c += (s - x) + t
                else:
                    c += (t - x) + s
                s = x
            else:
                s += t
        out[i] = s + c
    return out


@njit(cache=True)
def pair_energy_grad(ci, cj, u, table, p, grad):
    """Energy ``sum_{i != j} w_ij |u_i - u_j|^p`` and its gradient (in place)."""
    n = u.shape[0]
    for i in range(n):
        grad[i] = 0.0
    e = 0.0
    for i in range(n):
        ui = u[i]
        a = ci[i]
        b = cj[i]
        for j in range(i + 1, n):
            d = ui - u[j]
            ad = abs(d)
            if ad == 0.0:
                continue
            w = table[abs(a - ci[j]), abs(b - cj[j])]
            v = _abspow(ad, p)
            e += w * v
            g = w * p * v / d
            grad[i] += g
            grad[j] -= g
    for i in range(n):
        grad[i] *= 2.0
    return 2.0 * e


@njit(cache=True)
def pair_bilinear(ci, cj, u, v, table):
    """``sum_{i != j} w_ij (u_i - u_j)(v_i - v_j)``."""
    n = u.shape[0]
    e = 0.0
    for i in range(n):
        a = ci[i]
        b = cj[i]
        for j in range(i + 1, n):
            e += table[abs(a - ci[j]), abs(b - cj[j])] * (u[i] - u[j]) * (v[i] - v[j])
    return 2.0 * e


@njit(cache=True)
def local_maximal_sweep(grid, values, ci, cj, origin_i, origin_j, radius_cells, off_i, off_j,
                        off_r2):
    """Local maximal function over open balls of radius ``k h``.

    ``off_*`` list lattice offsets sorted by squared length ``off_r2``.  For
    each cell the running sum of ``values`` over the ball is extended shell by
    shell, and the average is taken at every admissible radius.
    """
    n = ci.shape[0]
    out = np.zeros(n)
    for idx in range(n):
        kmax = radius_cells[idx]
        best = values[idx]
        total = 0.0
        count = 0
        pos = 0
        limit = off_r2.shape[0]
        for k in range(1, kmax + 1):
            r2 = k * k
            while pos < limit and off_r2[pos] < r2:
                gi = ci[idx] + off_i[pos] - origin_i
                gj = cj[idx] + off_j[pos] - origin_j
                total += values[grid[gi, gj]]
                count += 1
                pos += 1
            avg = total / count
            if avg > best:
                best = avg
        out[idx] = best
    return out


@njit(cache=True)
def pair_hessian(ci, cj, u, table, p, eta, hess):
    """Dense Hessian of the pair energy with ``|d|^(p-2)`` replaced by ``(|d| + eta)^(p-2)``."""
    n = u.shape[0]
    for i in range(n):
        for j in range(n):
            hess[i, j] = 0.0
    c0 = 2.0 * p * (p - 1.0)
    for i in range(n):
        ui = u[i]
        a = ci[i]
        b = cj[i]
        for j in range(i + 1, n):
            w = table[abs(a - ci[j]), abs(b - cj[j])]
            c = c0 * w * (abs(ui - u[j]) + eta) ** (p - 2.0)
            hess[i, j] -= c
            hess[j, i] -= c
            hess[i, i] += c
            hess[j, j] += c
