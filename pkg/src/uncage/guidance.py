"""Contrastive attention guidance.

Raw per-(block, head) attention maps are averaged, min-max rescaled to [0, 1]
per subject, Gaussian-smoothed, and reduced to one score per position: for
each object the weakest positive-pair attention minus the strongest
negative-pair attention, maximised over objects.
"""
from __future__ import annotations

import enum
import functools
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import kernels
from .errors import ContractViolation
from .prompt import PromptSpec


class Mode(enum.Enum):
    CONTRASTIVE = "contrastive"
    POSITIVE_ONLY = "positive"
    NEGATIVE_ONLY = "negative"

    @classmethod
    def parse(cls, value: "str | Mode") -> "Mode":
        if isinstance(value, Mode):
            return value
        aliases = {"positive_only": "positive", "negative_only": "negative", "p_only": "positive", "n_only": "negative"}
        return cls(aliases.get(value.lower(), value.lower()))


_MODE_CODE = {
    Mode.CONTRASTIVE: kernels.CONTRASTIVE,
    Mode.POSITIVE_ONLY: kernels.POSITIVE_ONLY,
    Mode.NEGATIVE_ONLY: kernels.NEGATIVE_ONLY,
}


@dataclass(frozen=True)
class GuidanceConfig:
    w_a: float = 3.0
    guidance_steps: int = 16
    sigma: float = 2.0
    blur_enabled: bool = True
    mode: Mode = Mode.CONTRASTIVE

    def __post_init__(self):
        if self.w_a < 0:
            raise ContractViolation(f"w_a must be >= 0, got {self.w_a}")
        if self.guidance_steps < 0:
            raise ContractViolation(f"guidance_steps must be >= 0, got {self.guidance_steps}")
        if not self.sigma > 0:
            raise ContractViolation(f"sigma must be > 0, got {self.sigma}")
        object.__setattr__(self, "mode", Mode.parse(self.mode))


@dataclass
class AttentionMaps:
    """Per-subject maps stacked along axis 0; row ``s`` belongs to subject id ``s``."""

    maps: np.ndarray  # (S, H, W)
    step: int = 0

    def __getitem__(self, sid: int) -> np.ndarray:
        return self.maps[sid]

    def __len__(self) -> int:
        return self.maps.shape[0]


def rescale(m: np.ndarray) -> np.ndarray:
    """Min-max rescale to [0, 1]; a constant map becomes all zeros."""
    lo, hi = m.min(), m.max()
    if hi == lo:
        return np.zeros_like(m, dtype=np.float64)
    return (m - lo) / (hi - lo)


def aggregate_attention(raw: Sequence[np.ndarray] | np.ndarray, step: int = 0) -> AttentionMaps:
    """Average over (block, head) slices, then rescale each subject's map.

    ``raw`` is a sequence of ``(S, H, W)`` slices or one ``(slices, S, H, W)`` array.
    """
    if len(raw) == 0:
        raise ContractViolation("no attention slices to aggregate")
    stack = np.asarray(raw, dtype=np.float64)
    if stack.ndim != 4:
        raise ContractViolation(f"expected (slices, S, H, W) attention, got shape {stack.shape}")
    mean = stack.mean(axis=0)
    lo = mean.min(axis=(1, 2), keepdims=True)
    hi = mean.max(axis=(1, 2), keepdims=True)
    span = hi - lo
    flat = span == 0
    out = (mean - lo) / np.where(flat, 1.0, span)
    out[np.broadcast_to(flat, out.shape)] = 0.0
    return AttentionMaps(np.ascontiguousarray(out), step)


@functools.lru_cache(maxsize=32)
def gaussian_kernel(sigma: float) -> np.ndarray:
    """Normalised taps on ``[-ceil(3 sigma), ceil(3 sigma)]``. Exactly symmetric;
    cached and read-only."""
    if not sigma > 0:
        raise ContractViolation(f"sigma must be > 0, got {sigma}")
    h = math.ceil(3 * sigma)
    x = np.arange(-h, h + 1, dtype=np.float64)
    g = np.exp(-(x**2) / (2 * sigma**2))
    g = g / g.sum()
    g.flags.writeable = False
    return g


def gaussian_blur(m: np.ndarray, sigma: float) -> np.ndarray:
    """Separable Gaussian smoothing with replicate padding. Accepts one
    ``(H, W)`` map or a ``(S, H, W)`` stack."""
    kernel = gaussian_kernel(sigma)
    arr = np.ascontiguousarray(m, dtype=np.float64)
    if arr.ndim == 2:
        return kernels.blur_stack(arr[None], kernel)[0]
    if arr.ndim == 3:
        return kernels.blur_stack(arr, kernel)
    raise ContractViolation(f"blur expects 2D or 3D input, got {arr.ndim}D")


def _csr(groups: Sequence[Sequence[int]]) -> tuple[np.ndarray, np.ndarray]:
    ptr = np.zeros(len(groups) + 1, dtype=np.int64)
    ptr[1:] = np.cumsum([len(g) for g in groups])
    idx = np.fromiter((i for g in groups for i in g), dtype=np.int64, count=int(ptr[-1]))
    return ptr, idx


@dataclass(frozen=True)
class PairIndex:
    """Positive/negative sets of a prompt flattened for the kernels."""

    pos_ptr: np.ndarray
    pos_idx: np.ndarray
    neg_ptr: np.ndarray
    neg_idx: np.ndarray

    @classmethod
    def from_spec(cls, spec: PromptSpec) -> "PairIndex":
        pos = [sorted(spec.positive_pairs[o]) for o in spec.objects]
        neg = [sorted(spec.negative_pairs[o]) for o in spec.objects]
        return cls(*_csr(pos), *_csr(neg))


def contrastive_scores(
    maps: AttentionMaps,
    spec: PromptSpec,
    mode: Mode | str = Mode.CONTRASTIVE,
    pairs: PairIndex | None = None,
) -> np.ndarray:
    mode = Mode.parse(mode)
    needed = max(spec.subject_ids) + 1
    if len(maps) < needed:
        raise ContractViolation(f"attention has {len(maps)} subject maps, prompt needs {needed}")
    pairs = pairs or PairIndex.from_spec(spec)
    stack = np.ascontiguousarray(maps.maps, dtype=np.float64)
    return kernels.contrastive(
        stack, pairs.pos_ptr, pairs.pos_idx, pairs.neg_ptr, pairs.neg_idx, _MODE_CODE[mode]
    )


def guidance_field(
    raw,
    spec: PromptSpec,
    cfg: GuidanceConfig,
    step: int = 0,
    pairs: PairIndex | None = None,
) -> np.ndarray:
    """Aggregate, optionally blur, and score: the full per-step guidance term."""
    maps = aggregate_attention(raw, step)
    if cfg.blur_enabled:
        maps = AttentionMaps(gaussian_blur(maps.maps, cfg.sigma), step)
    return contrastive_scores(maps, spec, cfg.mode, pairs)
