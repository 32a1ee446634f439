import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from uncage.errors import ContractViolation
from uncage.metrics import (
    aggregate,
    attribute_leakage,
    evaluate,
    missing_object,
    mixed_cells,
    object_mixture,
)
from uncage.synthmgt import Entity, SceneSpec, correct_token, gen_scene, ground_truth, region_masks, wrong_token


def scene_pair(radius=2.5):
    return SceneSpec(16, 16, (Entity(0, 1, (4, 4), radius), Entity(2, 3, (11, 11), radius)))


def test_ground_truth_is_clean():
    scene = scene_pair()
    r = evaluate(ground_truth(scene), scene)
    assert r.missing == (False, False)
    assert r.attribute_leakage == 0.0 and r.object_mixture == 0.0
    assert not r.leakage_vacuous and not r.mixture_vacuous


def test_missing_threshold_arithmetic():
    scene = scene_pair()
    region = region_masks(scene)[1]
    assert region.sum() == 21
    grid = ground_truth(scene)
    cells = np.argwhere(region)
    grid[region] = 0
    for r, c in cells[:5]:
        grid[r, c] = correct_token(1)
    assert missing_object(grid, scene, 0.3) == [False, True]
    for r, c in cells[5:7]:
        grid[r, c] = correct_token(1)
    assert missing_object(grid, scene, 0.3) == [False, False]


def test_missing_when_absent():
    scene = scene_pair()
    grid = ground_truth(scene)
    grid[grid == correct_token(1)] = 0
    assert missing_object(grid, scene, 1e-9) == [False, True]


def test_leakage_counts():
    scene = scene_pair()
    grid = np.zeros((16, 16), dtype=np.int64)
    grid.flat[:10] = correct_token(0)
    grid.flat[:3] = wrong_token(0)
    assert attribute_leakage(grid, scene) == (pytest.approx(0.3), False)
    grid[grid > 0] = wrong_token(0)
    assert attribute_leakage(grid, scene)[0] == 1.0
    assert attribute_leakage(np.zeros((16, 16), dtype=np.int64), scene) == (0.0, True)


def test_mixture_half_region():
    scene = scene_pair()
    grid = ground_truth(scene)
    cells = np.argwhere(region_masks(scene)[0])
    for r, c in cells[: len(cells) // 2 + 1]:
        grid[r, c] = correct_token(1)
    assert object_mixture(grid, scene, 0.2) == (0.5, False)
    assert mixed_cells(grid, scene).sum() == len(cells) // 2 + 1


def test_mixture_empty_grid():
    assert object_mixture(np.zeros((16, 16), dtype=np.int64), scene_pair()) == (0.0, True)


def test_shape_check():
    with pytest.raises(ContractViolation):
        evaluate(np.zeros((4, 4), dtype=np.int64), scene_pair())


@given(st.integers(0, 10**6), st.integers(1, 4))
def test_generated_ground_truth_clean(seed, n):
    scene, _ = gen_scene(np.random.default_rng(seed), 16, 16, n, 0.7, 0.1)
    r = evaluate(ground_truth(scene), scene)
    assert not any(r.missing) and r.attribute_leakage == 0 and r.object_mixture == 0


def random_grid(rng, scene):
    grid = ground_truth(scene)
    noise = rng.integers(0, scene.vocab_size, size=grid.shape)
    flip = rng.random(grid.shape) < 0.3
    return np.where(flip, noise, grid)


@given(st.integers(0, 10**6))
def test_permutation_covariant(seed):
    rng = np.random.default_rng(seed)
    scene, _ = gen_scene(rng, 16, 16, 2, 0.7, 0.3)
    grid = random_grid(rng, scene)
    swapped = SceneSpec(16, 16, scene.entities[::-1])
    # token of entity e becomes the same variant of entity 1-e
    remap = np.array([0, 3, 4, 1, 2])
    a, b = evaluate(grid, scene), evaluate(remap[grid], swapped)
    assert a.missing == b.missing[::-1]
    assert a.attribute_leakage == pytest.approx(b.attribute_leakage)
    assert a.object_mixture == b.object_mixture


@given(st.integers(0, 10**6))
def test_mixture_monotone(seed):
    rng = np.random.default_rng(seed)
    scene, _ = gen_scene(rng, 16, 16, 2, 0.7, 0.3)
    grid = random_grid(rng, scene)
    before = object_mixture(grid, scene)[0]
    own = np.argwhere((grid == correct_token(0)) & region_masks(scene)[0])
    if len(own):
        r, c = own[rng.integers(len(own))]
        grid[r, c] = correct_token(1)
        assert object_mixture(grid, scene)[0] >= before


@given(st.integers(0, 10**6))
def test_rates_bounded(seed):
    rng = np.random.default_rng(seed)
    scene, _ = gen_scene(rng, 16, 16, 3, 0.7, 0.2)
    grid = rng.integers(0, scene.vocab_size, size=(16, 16))
    r = evaluate(grid, scene)
    for v in (r.missing_rate, r.attribute_leakage, r.object_mixture):
        assert 0.0 <= v <= 1.0


def test_aggregate():
    scene = scene_pair()
    clean = evaluate(ground_truth(scene), scene)
    empty = evaluate(np.zeros((16, 16), dtype=np.int64), scene)
    agg = aggregate([clean, empty])
    assert agg.n_runs == 2 and agg.missing_rate == 0.5
    assert aggregate([]).n_runs == 0
