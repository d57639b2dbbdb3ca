import numpy as np
import pytest

from coupled_extremal import Grid, ProblemData, Weight, validate
from coupled_extremal.errors import NotPositive
from coupled_extremal.problem import (KahlerForm, flat_form, form_from_potential, matrix_form,
                                      max_of_smooth)


def test_form_from_potential_mass_and_density():
    g = Grid(1, 32)
    f = form_from_potential(2.0, g.cosine_series([((1, 1), 0.01)]))
    assert f.mass == 2.0
    assert abs(f.density.values.sum() * g.cell_volume - 2.0) < 1e-13


def test_non_positive_forms_rejected():
    g = Grid(1, 32)
    with pytest.raises(NotPositive):
        form_from_potential(-1.0, g.zeros())
    with pytest.raises(NotPositive):
        form_from_potential(1.0, g.cosine_series([((1, 0), 0.1)]))  # 1 - 4 pi^2 * 0.1 < 0
    with pytest.raises(NotPositive):
        matrix_form(Grid(2, 8), [[1.0, 2.0], [2.0, 1.0]])


def test_validate_clean_and_messages():
    g = Grid(1, 32)
    data = ProblemData([flat_form(g)], g.cosine_series([((1, 0), 0.1)]))
    assert validate(data) == []
    bad = KahlerForm(g.cosine_series([((1, 0), 2.0)], constant=1.0), 1.0)
    problems = validate(ProblemData([flat_form(g), bad], g.zeros()))
    assert any("form 2" in p and "positive" in p for p in problems)
    other = flat_form(Grid(1, 16))
    assert any("grid mismatch" in p for p in validate(ProblemData([other], g.zeros())))


def test_smooth_flag_requires_low_band():
    g = Grid(1, 32)
    rough = g.cosine_series([((9, 0), 0.01)])
    assert validate(ProblemData([flat_form(g)], rough))
    assert validate(ProblemData([flat_form(g)], Weight(rough, smooth=False))) == []


def test_max_of_smooth_and_summed_form():
    g = Grid(1, 16)
    w = max_of_smooth(g.cosine_series([((1, 0), 0.3)]), g.cosine_series([((0, 1), 0.3)]))
    assert not w.smooth
    data = ProblemData([flat_form(g), flat_form(g, 2.0)], w)
    s = data.summed_form()
    assert s.mass == 3.0 and np.allclose(s.density.values, 3.0)
    assert data.m == 2 and list(data.masses) == [1.0, 2.0]


def test_matrix_form_density():
    g = Grid(2, 8)
    f = matrix_form(g, [[2.0, 0.5j], [-0.5j, 1.0]])
    assert f.mass == pytest.approx(1.75)
    assert np.allclose(f.density.values, 1.75)
