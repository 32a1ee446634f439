"""Grid state, confidence and Gumbel score fields, score combination and top-k.

Score fields are plain ``(H, W)`` float64 arrays. Positions that are already
unmasked carry ``-inf`` so every field keeps the full grid shape.
"""
from __future__ import annotations

import functools
import math
from dataclasses import dataclass

import numpy as np

from .errors import ContractViolation

_TINY = np.finfo(np.float64).tiny


@functools.lru_cache(maxsize=8)
def _zeros(n: int) -> np.ndarray:
    z = np.zeros(n)
    z.flags.writeable = False
    return z


def _all_finite(x: np.ndarray) -> bool:
    # 0 * x is 0 for finite x and nan for inf/nan, so the dot product is finite
    # exactly when every entry is; cheaper than materialising isfinite(x)
    flat = np.ascontiguousarray(x, dtype=np.float64).ravel()
    return math.isfinite(float(np.dot(flat, _zeros(flat.size))))


@dataclass
class GridState:
    tokens: np.ndarray  # (H, W) int64
    masked: np.ndarray  # (H, W) bool
    step: int = 0

    @classmethod
    def empty(cls, height: int, width: int) -> "GridState":
        return cls(
            tokens=np.zeros((height, width), dtype=np.int64),
            masked=np.ones((height, width), dtype=bool),
        )

    @property
    def shape(self) -> tuple[int, int]:
        return self.tokens.shape

    @property
    def n_masked(self) -> int:
        return int(self.masked.sum())

    def copy(self) -> "GridState":
        return GridState(self.tokens.copy(), self.masked.copy(), self.step)

    def commit(self, positions: np.ndarray, sampled: np.ndarray) -> None:
        """Fix ``sampled`` tokens at ``positions`` (an (k, 2) row/col array)."""
        if positions.size == 0:
            return
        r, c = positions[:, 0], positions[:, 1]
        if not self.masked[r, c].all():
            raise ContractViolation("attempted to re-commit an unmasked position")
        self.tokens[r, c] = sampled[r, c]
        self.masked[r, c] = False


def confidence_scores(logits: np.ndarray, sampled: np.ndarray, state: GridState) -> np.ndarray:
    """Logit of the sampled token at masked positions, ``-inf`` elsewhere."""
    if logits.ndim != 3 or logits.shape[:2] != sampled.shape or sampled.shape != state.shape:
        raise ContractViolation(
            f"shape mismatch: logits {logits.shape}, sampled {sampled.shape}, grid {state.shape}"
        )
    gathered = np.take_along_axis(logits, sampled[..., None], axis=2)[..., 0]
    return np.where(state.masked, gathered, -np.inf)


def gumbel_transform(u: np.ndarray | float, tau: float) -> np.ndarray:
    """Map uniforms on (0, 1) to temperature-scaled Gumbel variates."""
    return -tau * np.log(-np.log(u))


def gumbel_noise(height: int, width: int, tau: float, rng: np.random.Generator) -> np.ndarray:
    if tau < 0:
        raise ContractViolation(f"Gumbel temperature must be >= 0, got {tau}")
    # Generator.random is on [0, 1); lift the single excluded endpoint
    u = np.maximum(rng.random((height, width)), _TINY)
    if tau == 0:
        return np.zeros((height, width))
    return gumbel_transform(u, tau)


def combine_scores(
    f_c: np.ndarray | None,
    f_g: np.ndarray | None,
    f_a: np.ndarray | None,
    w_a: float,
    t: int,
    guidance_steps: int,
) -> np.ndarray:
    """``F = F_c + F_g (+ w_a * F_a while t <= guidance_steps)``.

    ``None`` drops a term, which is how the confidence-only / noise-only
    ablations are expressed. The guidance term is skipped entirely (not added
    as zero) when it is inactive, so the baseline field is reproduced bitwise.
    """
    present = [f for f in (f_c, f_g, f_a) if f is not None]
    if not present:
        raise ContractViolation("combine_scores needs at least one field")
    shape = present[0].shape
    if any(f.shape != shape for f in present):
        raise ContractViolation(f"field shapes differ: {[f.shape for f in present]}")
    guided = f_a is not None and w_a != 0 and t <= guidance_steps
    if guided and not _all_finite(f_a):
        raise ContractViolation("guidance field must be finite")
    if f_c is not None and f_g is not None:
        total = f_c + f_g
    elif f_c is not None:
        total = f_c.copy()
    elif f_g is not None:
        total = f_g.copy()
    else:
        total = np.zeros(shape)
    if guided:
        total += w_a * f_a
    return total


def select_topk(scores: np.ndarray, state: GridState, k: int) -> np.ndarray:
    """The ``k`` masked positions with the largest score as an ordered (k, 2)
    array; ties go to the smaller row-major index."""
    flat_masked = np.flatnonzero(state.masked.ravel())
    if k > flat_masked.size:
        raise ContractViolation(f"k={k} exceeds masked count {flat_masked.size}")
    if k < 0:
        raise ContractViolation(f"k must be >= 0, got {k}")
    vals = scores.ravel()[flat_masked]
    order = np.argsort(-vals, kind="stable")[:k]
    chosen = flat_masked[order]
    return np.stack(np.unravel_index(chosen, state.shape), axis=1).astype(np.int64)
