"""Pure numpy/Python versions of the hot kernels.

Each function mirrors one in ``_ckernels.pyx`` with the same signature and the
same floating-point operation order, so both backends agree bitwise.
"""
from __future__ import annotations

import numpy as np

CONTRASTIVE, POSITIVE_ONLY, NEGATIVE_ONLY = 0, 1, 2


def blur_stack(stack: np.ndarray, kernel: np.ndarray) -> np.ndarray:
    """Separable correlation of every (H, W) slice with a symmetric odd-length
    ``kernel``, edge-replicated. Mirrored taps are summed before weighting."""
    S, H, W = stack.shape
    h = kernel.shape[0] // 2
    padded = np.pad(stack, ((0, 0), (h, h), (0, 0)), mode="edge")
    tmp = kernel[h] * stack
    for d in range(1, h + 1):
        tmp += kernel[h - d] * (padded[:, h - d:h - d + H, :] + padded[:, h + d:h + d + H, :])
    padded = np.pad(tmp, ((0, 0), (0, 0), (h, h)), mode="edge")
    out = kernel[h] * tmp
    for d in range(1, h + 1):
        out += kernel[h - d] * (padded[:, :, h - d:h - d + W] + padded[:, :, h + d:h + d + W])
    return out


def contrastive(stack, pos_ptr, pos_idx, neg_ptr, neg_idx, mode: int) -> np.ndarray:
    _, H, W = stack.shape
    best = np.full((H, W), -np.inf)
    for o in range(pos_ptr.shape[0] - 1):
        pos = pos_idx[pos_ptr[o]:pos_ptr[o + 1]]
        neg = neg_idx[neg_ptr[o]:neg_ptr[o + 1]]
        if mode != NEGATIVE_ONLY:
            p = stack[pos].min(axis=0)
        if mode != POSITIVE_ONLY:
            n = stack[neg].max(axis=0) if neg.size else np.zeros((H, W))
        if mode == CONTRASTIVE:
            score = p - n
        elif mode == POSITIVE_ONLY:
            score = p
        else:
            score = -n
        np.maximum(best, score, out=best)
    return best


def neighbor_votes(tokens: np.ndarray, committed: np.ndarray, vocab: int, radius: int) -> np.ndarray:
    """``out[i, j, v]`` = committed cells within Chebyshev ``radius`` of (i, j),
    excluding (i, j) itself, whose token is ``v``."""
    H, W = tokens.shape
    r = radius
    onehot = np.zeros((H + 2 * r, W + 2 * r, vocab), dtype=np.int64)
    rows, cols = np.nonzero(committed)
    onehot[rows + r, cols + r, tokens[rows, cols]] = 1
    out = np.zeros((H, W, vocab), dtype=np.int64)
    for di in range(2 * r + 1):
        for dj in range(2 * r + 1):
            if di == r and dj == r:
                continue
            out += onehot[di:di + H, dj:dj + W]
    return out


def radical_inverse_frac(index: int, base: int) -> tuple[int, int]:
    """Digit reversal of ``index`` as an exact fraction ``num / den``."""
    num, den = 0, 1
    while index > 0:
        index, digit = divmod(index, base)
        num = num * base + digit
        den *= base
    return num, den


def halton_order(height: int, width: int, max_draws: int) -> np.ndarray:
    total = height * width
    seen = np.zeros((height, width), dtype=bool)
    order = np.empty((total, 2), dtype=np.int64)
    n = 0
    i = 0
    while n < total:
        i += 1
        if i > max_draws:
            raise RuntimeError(f"Halton order incomplete after {max_draws} draws")
        xn, xd = radical_inverse_frac(i, 2)
        yn, yd = radical_inverse_frac(i, 3)
        row = yn * height // yd
        col = xn * width // xd
        if not seen[row, col]:
            seen[row, col] = True
            order[n] = (row, col)
            n += 1
    return order
