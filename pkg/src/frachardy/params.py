"""Exponent bundle shared by every energy, weight and capacity computation."""

from __future__ import annotations

import math
from dataclasses import dataclass


@dataclass(frozen=True)
class EnergyParams:
    """Fractional smoothness ``s``, integrability ``p`` and dimension ``n``."""

    s: float
    p: float
    n: int = 2

    def __post_init__(self):
        if not 0.0 < self.s < 1.0:
            raise ValueError(f"s must lie in (0, 1), got {self.s}")
        if not self.p > 0.0:
            raise ValueError(f"p must be positive, got {self.p}")
        if self.n not in (1, 2):
            raise ValueError(f"only n = 1 or 2 is supported, got {self.n}")

    @property
    def sp(self) -> float:
        return self.s * self.p

    @property
    def kernel_exponent(self) -> float:
        """Exponent ``n + sp`` of the pair kernel ``|x - y|^-(n + sp)``."""
        return self.n + self.sp

    @property
    def sobolev_exponent(self) -> float:
        """``p* = np / (n - sp)``; only defined for ``sp < n``."""
        self.require_subcritical()
        return self.n * self.p / (self.n - self.sp)

    @property
    def sphere_area(self) -> float:
        """Surface measure of the unit sphere in R^n (2 for n=1, 2*pi for n=2)."""
        return 2.0 if self.n == 1 else 2.0 * math.pi

    def require_convex(self):
        if not self.p > 1.0:
            raise ValueError(f"operation requires p > 1, got p = {self.p}")

    def require_subcritical(self):
        if not self.sp < self.n:
            raise ValueError(f"operation requires sp < n, got sp = {self.sp}, n = {self.n}")

    def to_dict(self) -> dict:
        return {"s": self.s, "p": self.p, "n": self.n}
