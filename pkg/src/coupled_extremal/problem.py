"""Input data: Kähler forms, the weight, and their validation."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import NotPositive
from .grid import Grid, ScalarField, integrate, laplacian, spectral_support


@dataclass(frozen=True, eq=False)
class KahlerForm:
    """A Kähler form on the flat torus, represented by its volume density.

    ``density`` is the top-degree density against the reference measure and
    ``mass`` its integral.  In complex dimension 2 the form is a constant
    Hermitian matrix ``metric`` and ``density`` is ``det(metric)``.
    """

    density: ScalarField
    mass: float
    metric: np.ndarray | None = None

    @classmethod
    def from_density(cls, density: ScalarField) -> "KahlerForm":
        return cls(density, integrate(density))

    @property
    def grid(self) -> Grid:
        return self.density.grid


def flat_form(grid: Grid, c: float = 1.0) -> KahlerForm:
    """The form ``c * omega_0`` (dimension 1) or ``c * I`` metric (dimension 2)."""
    if grid.ndim == 1:
        return form_from_potential(c, grid.zeros())
    return matrix_form(grid, c * np.eye(grid.ndim))


def form_from_potential(c: float, psi: ScalarField) -> KahlerForm:
    """``theta = c*omega_0 + dd^c psi`` in complex dimension 1.

    Raises :class:`NotPositive` if the density ``c + laplacian(psi)`` is not
    strictly positive.
    """
    if psi.grid.ndim != 1:
        raise ValueError("form_from_potential is defined for ndim = 1; use matrix_form")
    if not c > 0:
        raise NotPositive(f"mass c={c} must be positive")
    density = laplacian(psi) + float(c)
    if density.inf() <= 0:
        raise NotPositive(f"density min {density.inf():.4g} <= 0: not a Kähler form")
    return KahlerForm(density, float(c))


def matrix_form(grid: Grid, metric) -> KahlerForm:
    """Constant Hermitian metric ``g`` on a complex-dimension-2 torus."""
    g = np.asarray(metric, dtype=complex)
    if g.shape != (grid.ndim, grid.ndim):
        raise ValueError(f"metric must be {grid.ndim}x{grid.ndim}")
    if not np.allclose(g, g.conj().T, atol=1e-14):
        raise NotPositive("metric is not Hermitian")
    eig = np.linalg.eigvalsh(g)
    if eig.min() <= 0:
        raise NotPositive(f"metric eigenvalue {eig.min():.4g} <= 0")
    det = float(np.linalg.det(g).real)
    return KahlerForm(grid.constant(det), det, g)


@dataclass(frozen=True, eq=False)
class Weight:
    """The continuous weight; ``smooth`` marks band-limited weights."""

    phi: ScalarField
    smooth: bool = True

    @property
    def grid(self) -> Grid:
        return self.phi.grid


def max_of_smooth(a: ScalarField, b: ScalarField) -> Weight:
    """Continuous, non-smooth weight ``max(a, b)``."""
    return Weight(ScalarField(a.grid, np.maximum(a.values, b.values)), smooth=False)


@dataclass(frozen=True, eq=False)
class ProblemData:
    """The tuple ``(theta_1, ..., theta_m, phi, omega_0)``."""

    forms: tuple
    weight: Weight
    reference: ScalarField | None = field(default=None)

    def __post_init__(self):
        object.__setattr__(self, "forms", tuple(self.forms))
        if isinstance(self.weight, ScalarField):
            object.__setattr__(self, "weight", Weight(self.weight))
        if self.reference is None:
            object.__setattr__(self, "reference", self.weight.grid.constant(1.0))

    @property
    def grid(self) -> Grid:
        return self.weight.grid

    @property
    def m(self) -> int:
        return len(self.forms)

    @property
    def phi(self) -> ScalarField:
        return self.weight.phi

    @property
    def masses(self) -> np.ndarray:
        return np.array([f.mass for f in self.forms])

    def with_weight(self, phi) -> "ProblemData":
        """Same forms, new weight (a field or a :class:`Weight`)."""
        if isinstance(phi, ScalarField):
            phi = Weight(phi, smooth=self.weight.smooth)
        return ProblemData(self.forms, phi, self.reference)

    def summed_form(self) -> KahlerForm:
        """The form ``theta_1 + ... + theta_m`` (densities and masses add)."""
        density = self.forms[0].density
        for f in self.forms[1:]:
            density = density + f.density
        return KahlerForm(density, float(sum(f.mass for f in self.forms)))


def validate(data: ProblemData) -> list:
    """List of invariant violations; empty means valid."""
    problems = []
    grid = data.weight.grid
    if data.m < 1:
        problems.append("need at least one form")
    for j, form in enumerate(data.forms, start=1):
        if form.grid != grid:
            problems.append(f"grid mismatch: form {j}")
            continue
        lo = form.density.inf()
        if not lo > 0:
            problems.append(f"form {j}: density not strictly positive (min {lo:.4g})")
        if not form.mass > 0:
            problems.append(f"form {j}: mass {form.mass:.4g} not positive")
        actual = integrate(form.density)
        if abs(actual - form.mass) > 1e-12 * max(1.0, abs(form.mass)):
            problems.append(f"form {j}: cached mass {form.mass!r} != integral {actual!r}")
        if grid.ndim == 2:
            if form.metric is None:
                problems.append(f"form {j}: ndim = 2 requires a constant metric")
            elif np.linalg.eigvalsh(form.metric).min() <= 0:
                problems.append(f"form {j}: metric not positive definite")
    if data.reference.grid != grid:
        problems.append("grid mismatch: reference")
    elif abs(integrate(data.reference) - 1.0) > 1e-12:
        problems.append(f"reference volume {integrate(data.reference)!r} != 1")
    if data.weight.smooth:
        k = spectral_support(data.weight.phi)
        if k >= grid.resolution // 4:
            problems.append(f"weight flagged smooth but carries wavenumber {k} >= N/4")
    return problems
