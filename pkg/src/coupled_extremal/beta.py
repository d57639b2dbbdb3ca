"""The thermodynamic system at fixed temperature ``1/beta``.

For each ``beta > 0`` the potentials solve

    (rho_j + dd^c phi_j) / V_j = exp(beta * (phi_1 + ... + phi_m - phi))   for all j,

normalized by ``sup phi_j = 0`` for ``j >= 2``.  In complex dimension 1 all
``m`` equations share their right-hand side, so the sum ``s`` obeys the
single Liouville-type equation

    Delta s = lam * exp(beta * (s - phi)) - R,     lam = sum V_j,  R = sum rho_j,

which is solved by damped Newton.  Each ``phi_j`` is then recovered from a
linear Poisson problem.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse.linalg as spla

from .energy import f_phi_beta
from .errors import ExponentClampWarning, NoConvergence, PositivityLoss
from .grid import (EXP_CLAMP, ScalarField, clamped_exp, complex_hessian, laplacian,
                   log_mean_exp, poisson_solve, random_band_limited)
from .krylov import pcg, stencil_preconditioner
from .problem import ProblemData

EPS = np.finfo(float).eps


@dataclass(frozen=True, eq=False)
class BetaSolution:
    beta: float
    potentials: tuple
    residual_sup: float
    newton_iters: int
    exponent_clamped: bool = False
    residual_floor: float = 0.0
    cg_iters: int = 0

    @property
    def total(self) -> ScalarField:
        s = self.potentials[0]
        for p in self.potentials[1:]:
            s = s + p
        return s

    def unit_mass(self, data: ProblemData) -> float:
        """``int exp(beta (sum phi_j - phi))``; equals 1 at a solution."""
        gap = (self.total - data.phi).values
        return float(np.exp(log_mean_exp(self.beta * gap, data.grid.cell_volume)))


def beta_residual(data: ProblemData, beta: float, potentials) -> float:
    """``max_j sup |MA_j - V_j exp(beta (sum phi_k - phi))|`` from raw fields."""
    from .energy import ma_measure

    s = potentials[0]
    for p in potentials[1:]:
        s = s + p
    rhs, _ = clamped_exp(beta * (s - data.phi).values)
    worst = 0.0
    for form, p in zip(data.forms, potentials):
        dens = ma_measure(form, p, check=False).density.values
        worst = max(worst, float(np.abs(dens - form.mass * rhs).max()))
    return worst


class _Liouville:
    """Residual and Newton machinery for the scalar equation in ``s``."""

    def __init__(self, data: ProblemData, beta: float):
        self.grid = data.grid
        self.beta = beta
        self.phi = data.phi.values
        self.R = sum(f.density.values for f in data.forms)
        self.lam = float(sum(f.mass for f in data.forms))
        self.phi_scale = float(np.abs(self.phi).max())

    def residual(self, s):
        e, clamped = clamped_exp(self.beta * (s - self.phi), EXP_CLAMP)
        lap = laplacian(ScalarField(self.grid, s)).values
        return self.R + lap - self.lam * e, e, clamped

    def floor(self, s, e):
        # rounding of beta*(s - phi) perturbs the exponential by ~eps*beta*|s|
        scale = max(float(np.abs(s).max()), self.phi_scale)
        return 4.0 * EPS * (self.beta * scale * self.lam * float(e.max()) + float(self.R.max()))

    def linear_solve(self, diag, rhs, preconditioner, rtol):
        """Solve ``(-Delta + diag) x = rhs``."""
        grid = self.grid
        if preconditioner == "stencil":
            precond = stencil_preconditioner(grid.resolution, diag)
            maxiter = 200
        elif preconditioner == "spectral":
            sym = -grid.laplacian_symbol + float(diag.mean())
            sym.flat[0] = max(sym.flat[0], 1e-300)
            precond = lambda r: grid.ifft(grid.fft(r) / sym)
            maxiter = 4000
        else:
            raise ValueError(f"unknown preconditioner {preconditioner!r}")

        def apply_A(v):
            return -laplacian(ScalarField(grid, v)).values + diag * v

        return pcg(apply_A, rhs, precond=precond, rtol=rtol, maxiter=maxiter)


def _recover(data: ProblemData, beta: float, s: np.ndarray, tol_mean: float) -> tuple:
    grid = data.grid
    e, _ = clamped_exp(beta * (s - data.phi.values))
    parts = []
    for form in data.forms[1:]:
        rhs = ScalarField(grid, form.mass * e - form.density.values)
        u = poisson_solve(rhs, tol_mean=tol_mean * form.mass)
        parts.append(u - u.sup())
    first = ScalarField(grid, s)
    for p in parts:
        first = first - p
    return (first, *parts)


def solve_beta(data: ProblemData, beta: float, init=None, tol: float = 1e-10,
               max_newton: int = 60, preconditioner: str = "stencil",
               cg_rtol: float = 1e-12) -> BetaSolution:
    """Solve the fixed-``beta`` system by the scalar reduction.

    ``init`` is an optional list of ``m`` potentials; only their sum is
    used.  Newton stops once the sup-residual is below ``tol`` or below the
    round-off floor ``~eps * beta * sup|s| * sup(density)``, whichever is
    larger; that floor is reported as ``residual_floor``.  Dimension 2 is
    forwarded to :func:`solve_beta_nd`.
    """
    if not beta > 0:
        raise ValueError("beta must be positive")
    if data.grid.ndim == 2:
        return solve_beta_nd(data, beta, init=init, tol=tol)
    if data.grid.ndim != 1:
        raise ValueError("solve_beta supports ndim = 1")
    eq = _Liouville(data, beta)
    if init is None:
        s = np.zeros(data.grid.shape)
    else:
        if len(init) != data.m:
            raise ValueError(f"init needs {data.m} potentials")
        s = sum(np.asarray(p.values) for p in init).astype(float)
    # shift so that int exp(beta (s - phi)) = 1, as any solution must; this
    # also keeps the exponent below log(1/cell volume) at the start
    s = s - log_mean_exp(beta * (s - eq.phi), data.grid.cell_volume) / beta

    F, e, clamped = eq.residual(s)
    res = float(np.abs(F).max())
    ever_clamped = clamped
    cg_total = 0
    it = 0
    while True:
        floor = eq.floor(s, e)
        if res <= max(tol, floor) and not clamped:
            break
        if it >= max_newton:
            raise NoConvergence("Newton on the Liouville equation", it,
                                best=ScalarField(data.grid, s),
                                diagnostics={"residual": res, "floor": floor, "clamped": clamped})
        it += 1
        diag = eq.lam * beta * e
        delta, ncg, _ = eq.linear_solve(diag, F, preconditioner, cg_rtol)
        cg_total += ncg
        step = 1.0
        for _ in range(31):
            trial = s + step * delta
            F_t, e_t, clamped_t = eq.residual(trial)
            ever_clamped |= clamped_t
            res_t = float(np.abs(F_t).max())
            if res_t < res:
                break
            step *= 0.5
        else:
            if res <= max(tol, floor) * 10 and not clamped:
                break
            raise NoConvergence("backtracking failed to reduce the residual", it,
                                best=ScalarField(data.grid, s),
                                diagnostics={"residual": res, "floor": floor})
        s, F, e, clamped, res = trial, F_t, e_t, clamped_t, res_t
    if ever_clamped:
        warnings.warn(f"exponent clamped at {EXP_CLAMP:g} during the beta={beta:g} solve",
                      ExponentClampWarning, stacklevel=2)

    floor = eq.floor(s, e)
    tol_mean = 10.0 * max(tol, floor, res) / eq.lam + 1e-13
    potentials = _recover(data, beta, s, tol_mean)
    return BetaSolution(
        beta=float(beta),
        potentials=potentials,
        residual_sup=beta_residual(data, beta, potentials),
        newton_iters=it,
        exponent_clamped=ever_clamped,
        residual_floor=floor,
        cg_iters=cg_total,
    )


def predict(sol: BetaSolution, data: ProblemData, beta_new: float,
            preconditioner: str = "stencil") -> list:
    """Tangent predictor for the solution at ``beta_new``.

    Uses ``d s / d(1/beta)`` at ``sol``: in the contact region ``s - phi``
    scales like ``1/beta``, so extrapolating linearly in ``1/beta`` keeps
    the exponent ``beta (s - phi)`` near its converged value.
    """
    beta = sol.beta
    if data.grid.ndim != 1 or beta_new == beta:
        return list(sol.potentials)
    eq = _Liouville(data, beta)
    s = sol.total.values
    _, e, _ = eq.residual(s)
    ds_dbeta, _, _ = eq.linear_solve(eq.lam * beta * e, -eq.lam * e * (s - eq.phi),
                                     preconditioner, 1e-10)
    s_new = s + beta * (1.0 - beta / beta_new) * ds_dbeta
    first = ScalarField(data.grid, s_new)
    for p in sol.potentials[1:]:
        first = first - p
    return [first, *sol.potentials[1:]]


# -- complex dimension 2 (experimental) -----------------------------------

def _adjugate2(A):
    return np.array([[A[1, 1], -A[0, 1]], [-A[1, 0], A[0, 0]]])


def _trace_operator_symbol(grid, M):
    """Fourier symbol of ``v -> trace(M H(v))`` for a constant matrix ``M``."""
    d = grid.derivative_symbols
    sym = 0.0
    for k in range(grid.ndim):
        for l in range(grid.ndim):
            xk, yk, xl, yl = 2 * k, 2 * k + 1, 2 * l, 2 * l + 1
            h = d[xk] * d[xl] + d[yk] * d[yl] + 1j * (d[xk] * d[yl] - d[yk] * d[xl])
            sym = sym + M[l, k] * h
    return np.real(sym)


def _positive(A):
    tr = (A[0, 0] + A[1, 1]).real
    det = (A[0, 0] * A[1, 1] - A[0, 1] * A[1, 0]).real
    return bool(tr.min() > 0 and det.min() > 0)


def solve_ma(form, target: np.ndarray, u0: np.ndarray | None = None, tol: float = 1e-11,
             max_newton: int = 30) -> np.ndarray:
    """Mean-zero ``u`` with ``det(g + H(u)) = target`` on the 2-dimensional torus.

    ``target`` must have mass ``det(g)``.  Damped Newton; each linear step
    is a GMRES solve preconditioned by the constant-coefficient operator
    ``trace(adj(g) H(.))``.
    """
    grid = form.grid
    g = form.metric
    G = g[:, :, None, None, None, None]
    sym = _trace_operator_symbol(grid, _adjugate2(g))
    # modes the discrete Hessian cannot see (constant, Nyquist) are left alone
    sym[np.abs(sym) < 1e-12 * np.abs(sym).max()] = np.inf
    shape = grid.shape
    u = np.zeros(shape) if u0 is None else u0 - u0.mean()

    def state(v):
        A = complex_hessian(ScalarField(grid, v)) + G
        det = (A[0, 0] * A[1, 1] - A[0, 1] * A[1, 0]).real
        return A, det

    A, det = state(u)
    r = target - det
    res = float(np.abs(r).max())
    for it in range(max_newton + 1):
        if res <= tol:
            return u
        if it == max_newton:
            break
        adj = _adjugate2(A)

        def matvec(v, adj=adj):
            H = complex_hessian(ScalarField(grid, v.reshape(shape)))
            out = sum(adj[l, k] * H[k, l] for k in range(2) for l in range(2)).real
            return out.ravel()

        def psolve(v):
            c = grid.fft(v.reshape(shape)) / sym
            return grid.ifft(c).ravel()

        n = grid.size
        op = spla.LinearOperator((n, n), matvec=matvec, dtype=float)
        pre = spla.LinearOperator((n, n), matvec=psolve, dtype=float)
        rhs = (r - r.mean()).ravel()
        delta, _ = spla.gmres(op, rhs, M=pre, rtol=1e-12, atol=0.0, restart=60, maxiter=20)
        delta = delta.reshape(shape)
        delta -= delta.mean()
        step = 1.0
        for _ in range(31):
            A_t, det_t = state(u + step * delta)
            if _positive(A_t):
                r_t = target - det_t
                if float(np.abs(r_t).max()) < res:
                    break
            step *= 0.5
        else:
            raise PositivityLoss("damping could not keep g + H(u) positive definite", it,
                                 best=ScalarField(grid, u), diagnostics={"residual": res})
        u = u + step * delta
        A, det, r = A_t, det_t, r_t
        res = float(np.abs(r).max())
    raise NoConvergence("Monge-Ampere Newton", max_newton, best=ScalarField(grid, u),
                        diagnostics={"residual": res})


def solve_beta_nd(data: ProblemData, beta: float, init=None, tol: float = 1e-10,
                  max_outer: int = 200, relax: float = 1.0) -> BetaSolution:
    """Fixed-``beta`` system in complex dimension 2 (experimental).

    Outer fixed point on ``s = sum phi_j``: given ``s`` each ``phi_j`` solves
    ``det(g_j + H(phi_j)) = V_j exp(beta (s - phi)) / int exp(beta (s - phi))``,
    then ``s`` is rebuilt and shifted so the unit-mass identity holds.  The
    iteration contracts when ``beta`` is small against the first eigenvalue
    of the trace operators.
    """
    grid = data.grid
    if grid.ndim != 2:
        raise ValueError("solve_beta_nd needs ndim = 2")
    vol = grid.cell_volume
    phi = data.phi.values
    parts = [np.zeros(grid.shape) for _ in data.forms]
    if init is not None:
        s = sum(np.asarray(p.values) for p in init)
    else:
        s = np.zeros(grid.shape)
    res = np.inf
    for outer in range(1, max_outer + 1):
        x = beta * (s - phi)
        w = np.exp(x - log_mean_exp(x, vol))
        parts = [solve_ma(f, f.mass * w, u0=p, tol=0.1 * tol) for f, p in zip(data.forms, parts)]
        total = sum(parts)
        shift = -log_mean_exp(beta * (total - phi), vol) / beta
        s_new = total + shift
        s = s + relax * (s_new - s)
        pots = [ScalarField(grid, p) for p in parts]
        pots[0] = pots[0] + shift
        res = beta_residual(data, beta, pots)
        if res <= tol:
            break
    else:
        raise NoConvergence("outer fixed point (ndim = 2)", max_outer,
                            diagnostics={"residual": res})
    normalized = [p - p.sup() for p in pots[1:]]
    first = pots[0]
    for p, q in zip(pots[1:], normalized):
        first = first + (p - q)
    potentials = (first, *normalized)
    return BetaSolution(float(beta), potentials, beta_residual(data, beta, potentials), outer)


# -- optimality check ------------------------------------------------------

@dataclass
class MaximizerReport:
    trials: int
    violations: int
    worst_gain: float
    second_difference_max: float
    seed: int
    tol: float = 1e-10
    gains: list = field(default_factory=list, repr=False)

    @property
    def passed(self) -> bool:
        return self.violations == 0 and self.second_difference_max <= self.tol


def maximizer_check(sol: BetaSolution, data: ProblemData, trials: int = 100, seed: int = 0,
                    tol: float = 1e-10, prefactor: str = "standard") -> MaximizerReport:
    """Random admissible perturbations must not increase ``f_phi^beta``.

    ``worst_gain`` is the largest ``f(perturbed) - f(solution)`` seen; a
    violation is a gain above ``tol``.  Also records the largest second
    difference ``f(t) + f(-t) - 2 f(0)`` along the trial lines.
    """
    rng = np.random.default_rng(seed)
    base = f_phi_beta(sol.potentials, data, sol.beta, prefactor)
    dens = [f.density.values + laplacian(p).values for f, p in zip(data.forms, sol.potentials)]
    gains, second = [], -np.inf
    for _ in range(trials):
        dirs = [random_band_limited(data.grid, rng) for _ in data.forms]
        t = 0.5 * min(float(d.min()) / max(laplacian(v).sup_norm(), 1e-300)
                      for d, v in zip(dens, dirs))
        t = min(t, 1e-2)
        plus = [p + t * v for p, v in zip(sol.potentials, dirs)]
        minus = [p - t * v for p, v in zip(sol.potentials, dirs)]
        fp = f_phi_beta(plus, data, sol.beta, prefactor)
        fm = f_phi_beta(minus, data, sol.beta, prefactor)
        gains.append(max(fp, fm) - base)
        second = max(second, fp + fm - 2.0 * base)
    gains = np.array(gains)
    return MaximizerReport(trials, int((gains > tol).sum()), float(gains.max()), float(second),
                           seed, tol, gains.tolist())
