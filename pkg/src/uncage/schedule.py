"""Cosine unmasking schedule and linearly annealed Gumbel temperature."""
from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import ContractViolation


@dataclass(frozen=True)
class ScheduleConfig:
    total_steps: int
    total_tokens: int
    temp_start: float = 1.0
    temp_end: float = 0.01

    def __post_init__(self):
        if self.total_steps < 1:
            raise ContractViolation(f"total_steps must be >= 1, got {self.total_steps}")
        if self.total_tokens < 1:
            raise ContractViolation(f"total_tokens must be >= 1, got {self.total_tokens}")
        if not (self.temp_start >= self.temp_end > 0):
            raise ContractViolation(
                f"need temp_start >= temp_end > 0, got {self.temp_start}, {self.temp_end}"
            )


def masked_counts(cfg: ScheduleConfig) -> list[int]:
    """Tokens still masked after each step, ``[n(0), ..., n(T)]``.

    ``n(t) = ceil(N * cos(pi * t / (2T)))`` with the endpoints pinned to N and 0.
    """
    T, N = cfg.total_steps, cfg.total_tokens
    n = [N]
    for t in range(1, T):
        n.append(min(N, math.ceil(N * math.cos(math.pi * t / (2 * T)))))
    n.append(0)
    return n


def unmask_counts(cfg: ScheduleConfig) -> list[int]:
    n = masked_counts(cfg)
    return [n[t - 1] - n[t] for t in range(1, len(n))]


def gumbel_temperature(t: int, cfg: ScheduleConfig) -> float:
    T = cfg.total_steps
    if not 1 <= t <= T:
        raise ContractViolation(f"step {t} outside 1..{T}")
    if T == 1:
        return cfg.temp_start
    return cfg.temp_start + (cfg.temp_end - cfg.temp_start) * (t - 1) / (T - 1)
