"""The classical envelope ``P_theta(phi)`` as a discrete obstacle problem.

The envelope solves the complementarity system

    min(phi - u, rho + Delta u) = 0

on the grid.  It is computed independently of the beta scheme: projected
SOR on the 5-point stencil locates the contact set, then a primal-dual
active-set iteration with the spectral Laplacian polishes the solution to
spectral-level residuals.  Only complex dimension 1 is supported.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse.linalg as spla

from .energy import MeasureDensity
from .errors import NoConvergence
from .grid import Grid, ScalarField, laplacian
from .krylov import neg_laplacian_5pt, pcg
from .problem import KahlerForm, ProblemData

KAPPA = 10.0


@dataclass(frozen=True, eq=False)
class EnvelopeSolution:
    u: ScalarField
    contact_mask: np.ndarray
    residuals: dict
    iterations: int
    tol: float
    form: KahlerForm = field(repr=False)
    obstacle: ScalarField = field(repr=False)
    sweeps: int = 0

    def measure(self) -> MeasureDensity:
        """Monge-Ampère measure ``rho + Delta u`` of the envelope."""
        return MeasureDensity(self.form.density + laplacian(self.u), self.form.mass)

    @property
    def density_sup(self) -> float:
        return self.measure().density.sup()


def residuals(form: KahlerForm, phi: ScalarField, u: ScalarField) -> dict:
    """Obstacle, positivity and complementarity residuals of a candidate ``u``."""
    gap = phi.values - u.values
    dens = form.density.values + laplacian(u).values
    return {
        "obstacle": float(max(0.0, -gap.min())),
        "positivity": float(max(0.0, -dens.min())),
        "complementarity": float(np.abs(np.minimum(gap, dens)).max()),
    }


def _psor(rho, phi, u, omega, tol, max_sweeps, stable_sweeps=50, loose_tol=1e-5):
    # the active-set polish only needs the contact set, so PSOR also stops
    # once the set has been stable for stable_sweeps and updates are small
    n = phi.shape[0]
    h2 = (1.0 / n) ** 2
    idx = np.add.outer(np.arange(n), np.arange(n))
    colors = (idx % 2 == 0, idx % 2 == 1)
    active = np.zeros(phi.shape, dtype=bool)
    sweeps = 0
    stable = 0
    for sweeps in range(1, max_sweeps + 1):
        before = active
        change = 0.0
        for color in colors:
            nb = np.roll(u, 1, 0) + np.roll(u, -1, 0) + np.roll(u, 1, 1) + np.roll(u, -1, 1)
            relaxed = u + omega * ((nb + h2 * rho) / 4.0 - u)
            clipped = relaxed >= phi
            new = np.where(clipped, phi, relaxed)
            change = max(change, float(np.abs(new - u)[color].max()))
            u = np.where(color, new, u)
            active = np.where(color, clipped, active)
        if change <= tol:
            break
        stable = stable + 1 if np.array_equal(before, active) else 0
        if stable >= stable_sweeps and change <= loose_tol:
            break
    return u, active, sweeps


def _solve_inactive(form, phi, active, u_guess):
    """Spectral equation ``rho + Delta u = 0`` off the active set, ``u = phi`` on it."""
    grid = phi.grid
    inactive = ~active
    idx = np.flatnonzero(inactive)
    if idx.size == 0:
        return phi.values.copy()
    on_active = np.where(active, phi.values, 0.0)
    b = (form.density.values + laplacian(ScalarField(grid, on_active)).values)[inactive]

    def apply_A(v):
        full = np.zeros(grid.size)
        full[idx] = v
        return -laplacian(ScalarField(grid, full)).values.ravel()[idx]

    # restricted 5-point operator is spectrally equivalent on the same subspace
    L5 = neg_laplacian_5pt(grid.resolution)[idx][:, idx]
    lu = spla.splu(L5.tocsc())
    x, _, _ = pcg(apply_A, b, precond=lu.solve, x0=u_guess[inactive], rtol=1e-14, maxiter=400)
    u = phi.values.copy()
    u[inactive] = x
    return u


def _coarse_guess(theta, phi, tol, max_iter, omega, polish_iter):
    """Envelope on the half-resolution grid, Fourier-interpolated back."""
    n = phi.grid.resolution
    coarse = Grid(1, n // 2)
    sub = (slice(None, None, 2), slice(None, None, 2))
    c_form = KahlerForm.from_density(ScalarField(coarse, theta.density.values[sub]))
    c_phi = ScalarField(coarse, phi.values[sub])
    try:
        u = project(c_form, c_phi, tol, max_iter, omega, polish_iter).u
    except NoConvergence as exc:
        u = exc.best
    coeffs = np.fft.fftshift(np.fft.fft2(u.values))
    padded = np.zeros((n, n), dtype=complex)
    lo = n // 4
    padded[lo:lo + n // 2, lo:lo + n // 2] = coeffs
    return np.fft.ifft2(np.fft.ifftshift(padded)).real * 4.0


def project(theta: KahlerForm, phi: ScalarField, tol: float = 1e-8, max_iter: int = 5000,
            omega: float = 1.5, polish_iter: int = 100, init: ScalarField | None = None) -> EnvelopeSolution:
    """Envelope of ``phi`` for ``theta`` on the grid.

    ``max_iter`` bounds the projected SOR sweeps, ``polish_iter`` the
    active-set steps.  Without ``init``, grids finer than 32 start from the
    envelope computed at half resolution.  Raises :class:`NoConvergence`
    (best iterate attached) if the residuals stay above ``tol``.
    """
    grid = phi.grid
    if grid.ndim != 1:
        raise ValueError("envelopes are implemented for ndim = 1 only")
    rho = theta.density.values
    if init is not None:
        u0 = init.values.copy()
    elif grid.resolution >= 64:
        u0 = _coarse_guess(theta, phi, tol, max_iter, omega, polish_iter)
    elif (rho + laplacian(phi).values).min() >= -tol:
        u0 = phi.values.copy()
    else:
        u0 = phi.values - phi.sup() + phi.inf()
    u, active, sweeps = _psor(rho, phi.values, np.minimum(u0, phi.values), omega, tol, max_iter)

    if not active.any():
        active = (phi.values - u) <= (phi.values - u).min()
    seen = set()
    best = None
    for it in range(1, polish_iter + 1):
        u = _solve_inactive(theta, phi, active, u)
        field_u = ScalarField(grid, u)
        res = residuals(theta, phi, field_u)
        score = max(res.values())
        if best is None or score < best[0]:
            best = (score, field_u, res)
        lam = rho + laplacian(field_u).values
        new_active = (lam - (phi.values - u)) > 0
        if not new_active.any():
            new_active = (phi.values - u) <= (phi.values - u).min()
        if np.array_equal(new_active, active):
            break
        key = new_active.tobytes()
        if key in seen:
            break
        seen.add(key)
        active = new_active
    score, field_u, res = best
    if score > tol:
        raise NoConvergence("envelope active-set polish did not reach tol", sweeps + it,
                            best=field_u, diagnostics=res)
    mask = (phi.values - field_u.values) <= KAPPA * tol
    return EnvelopeSolution(field_u, mask, res, sweeps + it, tol, theta, phi, sweeps)


def contact_set(sol: EnvelopeSolution, kappa: float = KAPPA) -> np.ndarray:
    """Points where the envelope touches the obstacle up to ``kappa * tol``."""
    return (sol.obstacle.values - sol.u.values) <= kappa * sol.tol


def sum_form_envelope(data: ProblemData, tol: float = 1e-8, **kwargs) -> EnvelopeSolution:
    """Envelope of the weight for the summed form ``theta_1 + ... + theta_m``."""
    return project(data.summed_form(), data.phi, tol=tol, **kwargs)
