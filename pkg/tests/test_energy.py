import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from coupled_extremal import Grid, ProblemData, energy, f_phi, f_phi_beta, ma_measure
from coupled_extremal.errors import NotAdmissible
from coupled_extremal.grid import integrate, random_band_limited
from coupled_extremal.problem import flat_form, form_from_potential, matrix_form
from coupled_extremal.verification import energy_derivative_test, mass_defect, random_admissible


def _admissible(form, rng, amp=0.01):
    return random_admissible(form, rng, amplitude=amp)


def test_energy_of_constant():
    g = Grid(1, 32)
    theta = flat_form(g, 3.0)
    assert energy(theta, g.constant(0.7)) == pytest.approx(0.7 * 3.0, abs=1e-14)
    assert energy(theta, g.constant(0.7), prefactor="none") == pytest.approx(1.4 * 3.0)


def test_energy_closed_form_cosine():
    # E(A cos) = (1/2)(0 + int A cos (1 - 4 pi^2 A cos)) = -pi^2 A^2 for the flat form
    g = Grid(1, 32)
    A = 0.02
    val = energy(flat_form(g), g.cosine_series([((1, 0), A)]))
    assert val == pytest.approx(-np.pi**2 * A**2, rel=1e-12)


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**31), st.floats(-2, 2))
def test_energy_shift_by_constant(seed, c):
    g = Grid(1, 16)
    theta = form_from_potential(1.5, g.cosine_series([((1, 1), 0.003)]))
    u = _admissible(theta, np.random.default_rng(seed))
    assert energy(theta, u + c) == pytest.approx(energy(theta, u) + c * theta.mass, abs=1e-12)


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**31))
def test_energy_first_variation(seed):
    rng = np.random.default_rng(seed)
    g = Grid(1, 32)
    theta = form_from_potential(1.0, g.cosine_series([((0, 1), 0.002)]))
    rep = energy_derivative_test(theta, _admissible(theta, rng), _admissible(theta, rng, amp=1.0))
    # the energy is quadratic in dimension 1: central differences are exact
    assert max(rep.errors) < 1e-12


def test_energy_first_variation_nd_is_second_order():
    rng = np.random.default_rng(1)
    g = Grid(2, 8)
    theta = matrix_form(g, [[1.0, 0.2], [0.2, 1.5]])
    u = random_band_limited(g, rng, kmax=1, amplitude=0.002)
    v = random_band_limited(g, rng, kmax=1, amplitude=0.002)
    rep = energy_derivative_test(theta, u, v, steps=(1.0, 0.5))
    assert rep.errors[-1] < 1e-8
    assert rep.order == pytest.approx(2.0, abs=0.2)


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**31))
def test_ma_mass_exact(seed):
    rng = np.random.default_rng(seed)
    g = Grid(1, 32)
    theta = form_from_potential(2.0, g.cosine_series([((1, 2), 0.001)]))
    assert mass_defect(theta, _admissible(theta, rng, amp=0.003)) < 1e-14


def test_ma_mass_exact_nd():
    g = Grid(2, 8)
    theta = matrix_form(g, [[1.0, 0.3 + 0.1j], [0.3 - 0.1j, 2.0]])
    u = random_band_limited(g, np.random.default_rng(2), kmax=1, amplitude=0.005)
    assert mass_defect(theta, u) < 1e-14


def test_ma_measure_nd_symbolic():
    sympy = pytest.importorskip("sympy")
    x1, y1, x2, y2 = sympy.symbols("x1 y1 x2 y2", real=True)
    expr = sympy.cos(2 * sympy.pi * (x1 - x2)) / 200 + sympy.sin(2 * sympy.pi * (y1 + y2)) / 300
    gm = sympy.Matrix([[1, sympy.Rational(3, 10)], [sympy.Rational(3, 10), 2]])
    z = [(x1, y1), (x2, y2)]
    H = sympy.zeros(2, 2)
    for k in range(2):
        for l in range(2):
            (xk, yk), (xl, yl) = z[k], z[l]
            H[k, l] = (sympy.diff(expr, xk, xl) + sympy.diff(expr, yk, yl)
                       + sympy.I * (sympy.diff(expr, xk, yl) - sympy.diff(expr, yk, xl)))
    det = sympy.simplify((gm + H).det())
    g = Grid(2, 8)
    X = g.coordinates
    u = g.field(sympy.lambdify((x1, y1, x2, y2), expr, "numpy")(*X))
    ref = np.real(sympy.lambdify((x1, y1, x2, y2), det, "numpy")(*X))
    got = ma_measure(matrix_form(g, np.array(gm, dtype=float)), u).density.values
    assert np.abs(got - ref).max() < 1e-10


def test_not_admissible_names_form():
    g = Grid(1, 16)
    data = ProblemData([flat_form(g), flat_form(g)], g.zeros())
    bad = g.cosine_series([((1, 0), 0.1)])
    with pytest.raises(NotAdmissible) as exc:
        f_phi([g.zeros(), bad], data)
    assert exc.value.index == 2


def test_f_phi_values():
    g = Grid(1, 16)
    data = ProblemData([flat_form(g), flat_form(g)], g.constant(0.4))
    zero = [g.zeros(), g.zeros()]
    assert f_phi(zero, data) == pytest.approx(0.4)
    assert f_phi_beta(zero, data, 7.0) == pytest.approx(0.4)


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**31), st.floats(0.1, 1e4))
def test_f_beta_dominates_f(seed, beta):
    # (1/beta) log int exp(beta g) <= sup g on a probability space
    rng = np.random.default_rng(seed)
    g = Grid(1, 16)
    data = ProblemData([flat_form(g)], random_band_limited(g, rng, amplitude=0.2))
    u = [random_admissible(data.forms[0], rng, amplitude=0.01)]
    assert f_phi_beta(u, data, beta) >= f_phi(u, data) - 1e-12


def test_integrate_constant():
    g = Grid(1, 16)
    assert integrate(g.constant(2.5)) == pytest.approx(2.5, abs=1e-15)
