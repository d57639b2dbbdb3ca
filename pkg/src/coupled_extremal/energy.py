"""Monge-Ampère measures, the Monge-Ampère energy and the variational functionals."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NotAdmissible
from .grid import ScalarField, complex_hessian, integrate, laplacian, log_mean_exp
from .problem import KahlerForm, ProblemData

TOL_POS = 1e-8
PREFACTORS = ("standard", "none")


@dataclass(frozen=True, eq=False)
class MeasureDensity:
    """A measure given by its density against the reference measure."""

    density: ScalarField
    mass: float

    @classmethod
    def of(cls, density: ScalarField) -> "MeasureDensity":
        return cls(density, integrate(density))

    def normalized(self, total: float) -> "MeasureDensity":
        return MeasureDensity(self.density / total, self.mass / total)


def ma_measure(theta: KahlerForm, phi: ScalarField, tol_pos: float = TOL_POS,
               check: bool = True, index=None) -> MeasureDensity:
    """``(theta + dd^c phi)^n``.

    Dimension 1 gives ``rho + laplacian(phi)``; dimension 2 dispatches to
    :func:`ma_measure_nd`.  With ``check`` a density below ``-tol_pos`` raises
    :class:`NotAdmissible`.
    """
    if phi.grid.ndim == 2:
        return ma_measure_nd(theta, phi, tol_pos=tol_pos, check=check, index=index)
    density = theta.density + laplacian(phi)
    if check and density.inf() < -tol_pos:
        raise NotAdmissible(density.inf(), tol_pos, index)
    # mass is V exactly: the spectral Laplacian integrates to zero
    return MeasureDensity(density, theta.mass)


def _hermitian_det2(A: np.ndarray) -> np.ndarray:
    return (A[0, 0] * A[1, 1] - A[0, 1] * A[1, 0]).real


def ma_measure_nd(theta: KahlerForm, phi: ScalarField, tol_pos: float = TOL_POS,
                  check: bool = True, index=None) -> MeasureDensity:
    """``det(g + H(phi))`` for a constant metric ``g`` on the 2-dimensional torus.

    ``H`` is :func:`~coupled_extremal.grid.complex_hessian`, so ``phi = 0``
    gives the constant density ``det(g)``.  With ``check`` an indefinite
    pointwise matrix raises :class:`NotAdmissible`.
    """
    g = theta.metric
    if g is None or phi.grid.ndim != 2:
        raise ValueError("ma_measure_nd needs ndim = 2 and a matrix-valued form")
    A = complex_hessian(phi) + g[:, :, None, None, None, None]
    det = _hermitian_det2(A)
    if check:
        tr = (A[0, 0] + A[1, 1]).real
        worst = min(float(det.min()), float(tr.min()))
        if worst < -tol_pos:
            raise NotAdmissible(worst, tol_pos, index)
    return MeasureDensity(ScalarField(phi.grid, det), theta.mass)


def _mixed_with_metric(theta: KahlerForm, phi: ScalarField) -> np.ndarray:
    """Density of ``(theta + dd^c phi) ^ theta`` in dimension 2."""
    g = theta.metric
    H = complex_hessian(phi)
    adj = np.array([[g[1, 1], -g[0, 1]], [-g[1, 0], g[0, 0]]])
    tr = sum(adj[l, k] * H[k, l] for k in range(2) for l in range(2)).real
    return float(np.linalg.det(g).real) + 0.5 * tr


def energy(theta: KahlerForm, phi: ScalarField, prefactor: str = "standard",
           tol_pos: float = TOL_POS) -> float:
    """Monge-Ampère energy ``E_theta(phi)``.

    ``prefactor="standard"`` divides the sum over mixed products by ``n + 1``
    so that ``E(phi + c) = E(phi) + c*V``; ``"none"`` omits the factor.
    """
    if prefactor not in PREFACTORS:
        raise ValueError(f"prefactor must be one of {PREFACTORS}")
    grid = phi.grid
    top = ma_measure(theta, phi, tol_pos=tol_pos)
    terms = [integrate(phi * theta.density), integrate(phi * top.density)]
    if grid.ndim == 2:
        terms.insert(1, integrate(phi * ScalarField(grid, _mixed_with_metric(theta, phi))))
    total = sum(terms)
    if prefactor == "standard":
        total /= grid.ndim + 1
    return float(total)


def _energy_sum(potentials, data: ProblemData, prefactor: str) -> float:
    if len(potentials) != data.m:
        raise ValueError(f"expected {data.m} potentials, got {len(potentials)}")
    total = 0.0
    for j, (form, p) in enumerate(zip(data.forms, potentials), start=1):
        try:
            total += energy(form, p, prefactor) / form.mass
        except NotAdmissible as exc:
            raise NotAdmissible(exc.min_density, exc.tol_pos, j) from None
    return total


def _sum(potentials) -> ScalarField:
    s = potentials[0]
    for p in potentials[1:]:
        s = s + p
    return s


def f_phi(potentials, data: ProblemData, prefactor: str = "standard") -> float:
    """``sum_j E_j(phi_j)/V_j - sup(sum_j phi_j - phi)``."""
    gap = _sum(potentials) - data.phi
    return _energy_sum(potentials, data, prefactor) - gap.sup()


def f_phi_beta(potentials, data: ProblemData, beta: float,
               prefactor: str = "standard") -> float:
    """``sum_j E_j(phi_j)/V_j - (1/beta) log int exp(beta (sum_j phi_j - phi))``."""
    if not beta > 0:
        raise ValueError("beta must be positive")
    gap = _sum(potentials) - data.phi
    lme = log_mean_exp(beta * gap.values, data.grid.cell_volume)
    return _energy_sum(potentials, data, prefactor) - lme / beta


def pairing(v: ScalarField, mu: MeasureDensity) -> float:
    """``int v dmu``."""
    return integrate(v * mu.density)
