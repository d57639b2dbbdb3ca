import numpy as np
import pytest

from coupled_extremal import (BetaSchedule, big_F, concavity_test, differentiability_test,
                              energy, project, uniqueness_test)

from conftest import cosine_data, flat_data, mixed_data

FAST = BetaSchedule(beta_max=4.0**8)


def test_big_F_flat_cases():
    assert big_F(flat_data(16, 2)) == pytest.approx(0.0, abs=1e-14)
    assert big_F(flat_data(16, 2, phi=0.37)) == pytest.approx(0.37, abs=1e-12)


def test_big_F_m1_equals_envelope_energy():
    data = cosine_data(64, 0.5)
    env = project(data.forms[0], data.phi)
    assert abs(big_F(data) - energy(data.forms[0], env.u) / data.forms[0].mass) <= 5e-3


def test_derivative_constant_direction():
    data = mixed_data(32)
    rep = differentiability_test(data, data.grid.constant(1.0), schedule=FAST)
    assert all(abs(s - 1.0) <= 1e-10 for s in rep.slopes)
    assert rep.pairing == pytest.approx(1.0, abs=1e-12)


def test_derivative_antisymmetric():
    data = cosine_data(32, 0.5)
    v = data.grid.cosine_series([((0, 1), 1.0)])
    a = differentiability_test(data, v, steps=(0.04, 0.02), schedule=FAST)
    b = differentiability_test(data, -1.0 * v, steps=(0.04, 0.02), schedule=FAST)
    assert all(abs(x + y) <= 2 * FAST.ladder_tol for x, y in zip(a.slopes, b.slopes))


def test_derivative_steps_validated():
    data = cosine_data(16, 0.1)
    with pytest.raises(ValueError):
        differentiability_test(data, data.grid.constant(1.0), steps=(0.01, 0.02))
    with pytest.raises(ValueError):
        differentiability_test(data, data.grid.constant(1.0), steps=(0.5,))


def test_concavity_trivial_equalities():
    data = cosine_data(32, 0.3)
    phi = data.phi
    same = concavity_test(data, phi, phi, 3, FAST)
    assert max(abs(c - v) for c, v in zip(same.chords, same.values)) <= 1e-12
    shifted = concavity_test(data, phi, phi + 0.2, 3, FAST)
    assert max(abs(c - v) for c, v in zip(shifted.chords, shifted.values)) <= 1e-10


def test_uniqueness_trivial():
    rep = uniqueness_test(flat_data(16, 2), 5, FAST)
    assert rep.max_potential_distance <= 1e-10 and rep.max_sum_distance <= 1e-10


def test_big_F_monotone():
    data = cosine_data(32, 0.3)
    bump = 0.05 * (1 + data.grid.cosine_series([((1, 1), 1.0)]))
    lo = big_F(data, FAST)
    hi = big_F(data.with_weight(data.phi + bump), FAST)
    assert lo <= hi + 1e-4


def test_reports_deterministic():
    data = mixed_data(16)
    a = uniqueness_test(data, 3, FAST, seed=11).as_dict()
    b = uniqueness_test(data, 3, FAST, seed=11).as_dict()
    assert a == b
    c = uniqueness_test(data, 3, FAST, seed=11, threads=3).as_dict()
    assert c == {**a, "n_starts": 3}
