"""Dyadic level sets ``E_k = {|u| > 2^k}`` and the truncations built from them."""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from ..energy import GridFunction

__all__ = ["LevelDecomposition", "level_truncation", "dyadic_level", "pair_inequality_violations"]

ZERO_LEVEL = np.iinfo(np.int64).min


def dyadic_level(values) -> np.ndarray:
    """Integer ``k`` with ``2^k < |v| <= 2^(k+1)``; ``ZERO_LEVEL`` where ``v = 0``.

    Computed from the binary exponent, so exact powers of two land on the
    correct side.
    """
    a = np.abs(np.asarray(values, dtype=float))
    mant, expo = np.frexp(a)
    level = np.where(mant == 0.5, expo - 2, expo - 1).astype(np.int64)
    return np.where(a == 0, ZERO_LEVEL, level)


@dataclass(eq=False)
class LevelDecomposition:
    """``F = {u = 0}`` and the annuli ``A_k = E_k minus E_(k+1)`` of ``u``.

    ``level[i]`` is the ``k`` with cell ``i`` in ``A_k`` (``ZERO_LEVEL`` on ``F``).
    """

    u: GridFunction
    level: np.ndarray

    @cached_property
    def levels(self) -> np.ndarray:
        """Sorted ``k`` with ``A_k`` nonempty."""
        return np.unique(self.level[self.level != ZERO_LEVEL])

    @property
    def zero(self) -> np.ndarray:
        return self.level == ZERO_LEVEL

    def E(self, k: int) -> np.ndarray:
        return (self.level >= k) & ~self.zero

    def A(self, k: int) -> np.ndarray:
        return self.level == k

    def truncation(self, k: int) -> GridFunction:
        """``u_k = min(1, max(0, |u| / 2^k - 1))``."""
        a = np.abs(self.u.values)
        vals = np.clip(np.ldexp(a, -int(k)) - 1.0, 0.0, 1.0)
        return GridFunction(self.u.domain, vals, meta={"k": int(k)})

    def is_partition(self) -> bool:
        covered = self.zero.astype(int) + sum(self.A(k).astype(int) for k in self.levels)
        return bool(np.all(covered == 1))


def level_truncation(u: GridFunction) -> LevelDecomposition:
    return LevelDecomposition(u, dyadic_level(u.values))


def pair_inequality_violations(dec: LevelDecomposition, k: int, rtol: float = 1e-12) -> int:
    """Count pairs ``x in A_i`` (or ``F``), ``y in A_j``, ``i <= k <= j`` with
    ``|u_k(x) - u_k(y)| > 2 * 2^-j |u(x) - u(y)|``.
    """
    uk = dec.truncation(k).values
    u = dec.u.values
    low = np.flatnonzero(dec.zero | ((dec.level <= k) & ~dec.zero))
    high = np.flatnonzero((dec.level >= k) & ~dec.zero)
    if len(low) == 0 or len(high) == 0:
        return 0
    j = dec.level[high]
    lhs = np.abs(uk[low][:, None] - uk[high][None, :])
    rhs = 2.0 * np.ldexp(np.abs(u[low][:, None] - u[high][None, :]), (-j[None, :]).astype(np.int32))
    return int(np.count_nonzero(lhs > rhs * (1 + rtol) + 1e-300))
