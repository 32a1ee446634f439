"""Input-independent Halton unmasking order (bases 2 and 3, index from 1)."""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache

import numpy as np

from . import kernels
from .errors import ContractViolation

DRAW_FACTOR = 64


def radical_inverse(index: int, base: int) -> float:
    if base < 2:
        raise ContractViolation(f"base must be >= 2, got {base}")
    if index < 0:
        raise ContractViolation(f"index must be >= 0, got {index}")
    num, den = 0, 1
    while index > 0:
        index, digit = divmod(index, base)
        num = num * base + digit
        den *= base
    return float(Fraction(num, den))


@dataclass(frozen=True)
class HaltonOrder:
    height: int
    width: int
    order: np.ndarray  # (H*W, 2) row/col, read-only

    def __len__(self) -> int:
        return self.order.shape[0]

    def as_tuples(self) -> list[tuple[int, int]]:
        return [(int(r), int(c)) for r, c in self.order]


@lru_cache(maxsize=32)
def halton_order(height: int, width: int) -> HaltonOrder:
    """Walk the 2D Halton sequence, mapping x to columns and y to rows, and keep
    the first hit of every cell until all cells are covered."""
    if height < 1 or width < 1:
        raise ContractViolation(f"grid must be at least 1x1, got {height}x{width}")
    order = kernels.halton_order(height, width, DRAW_FACTOR * height * width)
    order.setflags(write=False)
    return HaltonOrder(height, width, order)
