"""Missing-object, attribute-leakage and object-mixture rates on a final grid.

These are threshold-based proxies scored against the synthetic scene's ground
truth; the thresholds travel with every report.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ContractViolation
from .synthmgt import BACKGROUND, SceneSpec, region_masks, token_entity

THETA_MIN = 0.3
THETA_MIX = 0.2


def _check(grid: np.ndarray, scene: SceneSpec) -> None:
    if grid.shape != (scene.height, scene.width):
        raise ContractViolation(f"grid {grid.shape} does not match scene {scene.height}x{scene.width}")


def _entity_grid(grid: np.ndarray) -> np.ndarray:
    """Entity index carried by every cell, -1 for background."""
    return np.where(grid > 0, (grid - 1) // 2, -1)


def missing_object(grid: np.ndarray, scene: SceneSpec, theta_min: float = THETA_MIN) -> list[bool]:
    _check(grid, scene)
    ent = _entity_grid(grid)
    regions = region_masks(scene)
    return [
        bool((ent == e).sum() < theta_min * regions[e].sum())
        for e in range(len(scene.entities))
    ]


def attribute_leakage(grid: np.ndarray, scene: SceneSpec) -> tuple[float, bool]:
    """Mean over present objects of the wrong-attribute share among that
    object's cells. Returns ``(rate, vacuous)``."""
    _check(grid, scene)
    rates = []
    for e in range(len(scene.entities)):
        mine = grid[(grid > 0) & (_entity_grid(grid) == e)]
        if mine.size:
            rates.append(float(np.mean(mine % 2 == 0)))
    if not rates:
        return 0.0, True
    return float(np.mean(rates)), False


def object_mixture(grid: np.ndarray, scene: SceneSpec, theta_mix: float = THETA_MIX) -> tuple[float, bool]:
    """Share of object regions whose non-background cells carry more than
    ``theta_mix`` foreign-object tokens. Returns ``(rate, vacuous)``."""
    _check(grid, scene)
    ent = _entity_grid(grid)
    regions = region_masks(scene)
    mixed = 0
    any_tokens = False
    for e in range(len(scene.entities)):
        cells = ent[regions[e]]
        cells = cells[cells >= 0]
        if cells.size == 0:
            continue
        any_tokens = True
        if np.mean(cells != e) > theta_mix:
            mixed += 1
    if not any_tokens:
        return 0.0, True
    return mixed / len(scene.entities), False


def mixed_cells(grid: np.ndarray, scene: SceneSpec) -> np.ndarray:
    """Boolean map of cells inside a region carrying another object's token."""
    ent = _entity_grid(grid)
    regions = region_masks(scene)
    out = np.zeros(grid.shape, dtype=bool)
    for e in range(regions.shape[0]):
        out |= regions[e] & (ent >= 0) & (ent != e)
    return out


@dataclass(frozen=True)
class FidelityReport:
    missing: tuple[bool, ...]
    attribute_leakage: float
    object_mixture: float
    leakage_vacuous: bool = False
    mixture_vacuous: bool = False
    theta_min: float = THETA_MIN
    theta_mix: float = THETA_MIX

    @property
    def missing_rate(self) -> float:
        return sum(self.missing) / len(self.missing) if self.missing else 0.0


def evaluate(grid: np.ndarray, scene: SceneSpec, theta_min: float = THETA_MIN, theta_mix: float = THETA_MIX) -> FidelityReport:
    leak, leak_vac = attribute_leakage(grid, scene)
    mix, mix_vac = object_mixture(grid, scene, theta_mix)
    return FidelityReport(
        missing=tuple(missing_object(grid, scene, theta_min)),
        attribute_leakage=leak,
        object_mixture=mix,
        leakage_vacuous=leak_vac,
        mixture_vacuous=mix_vac,
        theta_min=theta_min,
        theta_mix=theta_mix,
    )


@dataclass(frozen=True)
class AggregateRates:
    n_runs: int
    missing_rate: float
    leakage: float
    mixture: float


def aggregate(reports: list[FidelityReport]) -> AggregateRates:
    n = len(reports)
    if n == 0:
        return AggregateRates(0, 0.0, 0.0, 0.0)
    return AggregateRates(
        n,
        float(np.mean([r.missing_rate for r in reports])),
        float(np.mean([r.attribute_leakage for r in reports])),
        float(np.mean([r.object_mixture for r in reports])),
    )
