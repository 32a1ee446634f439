import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

import oracles
from uncage.errors import ContractViolation
from uncage.schedule import ScheduleConfig, gumbel_temperature, masked_counts, unmask_counts


def test_single_step():
    assert unmask_counts(ScheduleConfig(1, 16)) == [16]


def test_four_steps_sixteen_tokens():
    assert unmask_counts(ScheduleConfig(4, 16)) == [1, 3, 5, 7]


def test_full_size_configuration():
    cfg = ScheduleConfig(64, 4096)
    k = unmask_counts(cfg)
    n = masked_counts(cfg)
    assert sum(k) == 4096 and len(k) == 64
    assert all(a >= b for a, b in zip(n, n[1:]))
    assert k == oracles.unmask_counts(64, 4096)


def test_temperature_endpoints():
    cfg = ScheduleConfig(64, 4096)
    assert gumbel_temperature(1, cfg) == 1.0
    assert gumbel_temperature(64, cfg) == pytest.approx(0.01, abs=1e-15)
    assert gumbel_temperature(33, cfg) == pytest.approx(0.4971428571428571, abs=1e-12)
    assert gumbel_temperature(1, ScheduleConfig(1, 4)) == 1.0


@pytest.mark.parametrize("t", [0, 65])
def test_temperature_out_of_range(t):
    with pytest.raises(ContractViolation):
        gumbel_temperature(t, ScheduleConfig(64, 4096))


@pytest.mark.parametrize("args", [(0, 4), (4, 0), (4, 4, 0.01, 1.0), (4, 4, 1.0, 0.0)])
def test_invalid_config(args):
    with pytest.raises(ContractViolation):
        ScheduleConfig(*args)


def test_conservation_exhaustive_small_range():
    for N in range(1, 201):
        for T in range(1, N + 1):
            k = unmask_counts(ScheduleConfig(T, N))
            assert sum(k) == N
            assert min(k) >= 0 and k[-1] >= 1


@given(st.integers(1, 10**5), st.data())
def test_conservation_property(N, data):
    T = data.draw(st.integers(1, min(N, 256)))
    cfg = ScheduleConfig(T, N)
    k = unmask_counts(cfg)
    n = masked_counts(cfg)
    assert sum(k) == N
    assert n[0] == N and n[-1] == 0
    assert all(a >= b for a, b in zip(n, n[1:]))
    assert all(x >= 0 for x in k) and k[-1] >= 1
    assert k == oracles.unmask_counts(T, N)


@given(st.integers(1, 200), st.floats(0.011, 5.0), st.floats(0.001, 0.01))
def test_temperature_monotone(T, start, end):
    cfg = ScheduleConfig(T, max(T, 1), start, end)
    taus = [gumbel_temperature(t, cfg) for t in range(1, T + 1)]
    assert all(a >= b for a, b in zip(taus, taus[1:]))
    assert math.isclose(taus[0], start)
