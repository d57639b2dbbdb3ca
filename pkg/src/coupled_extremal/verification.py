"""Theorem-level checks built on the solvers.

``big_F`` is the optimal value of ``f_phi``; the tests probe its
directional derivative, concavity, the uniqueness of the extremal
potentials, and the first variation of the Monge-Ampère energy.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .beta import solve_beta
from .continuation import BetaSchedule, ExtremalResult, solve_extremal
from .energy import energy, f_phi, ma_measure, pairing
from .grid import ScalarField, integrate, laplacian, random_band_limited
from .problem import KahlerForm, ProblemData


def big_F(data: ProblemData, schedule: BetaSchedule | None = None, tol: float = 1e-10,
          prefactor: str = "standard", return_result: bool = False):
    """``F(phi) = sup f_phi``, evaluated at the ladder's extremal potentials."""
    result = solve_extremal(data, schedule, tol=tol, prefactor=prefactor)
    value = f_phi(result.potentials, data, prefactor)
    return (value, result) if return_result else value


def _map(fn, items, threads):
    if threads is None or threads <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


@dataclass
class DerivativeReport:
    direction: ScalarField = field(repr=False)
    steps: list
    slopes: list
    pairing: float
    extrapolated_error: float
    K: float
    floor: float
    errors: list

    @property
    def passed(self) -> bool:
        return all(e <= self.K * t + self.floor for e, t in zip(self.errors, self.steps))

    def as_dict(self) -> dict:
        return {"steps": self.steps, "slopes": self.slopes, "pairing": self.pairing,
                "errors": self.errors, "K": self.K, "floor": self.floor,
                "extrapolated_error": self.extrapolated_error, "passed": self.passed}


def differentiability_test(data: ProblemData, v: ScalarField, steps=(0.04, 0.02, 0.01),
                           schedule: BetaSchedule | None = None, tol: float = 1e-10,
                           base: ExtremalResult | None = None, threads: int = 1,
                           floor: float | None = None) -> DerivativeReport:
    """Central differences of ``big_F`` along ``v`` against ``int v d mu_eq``.

    The error envelope is ``K t + floor`` with ``K`` the slope change between
    the two largest steps and ``floor = 10 * ladder_tol`` by default.
    """
    schedule = schedule or BetaSchedule()
    steps = [float(t) for t in steps]
    if any(not 0 < t <= 0.1 for t in steps) or any(a <= b for a, b in zip(steps, steps[1:])):
        raise ValueError("steps must be strictly decreasing in (0, 0.1]")
    if base is None:
        base = solve_extremal(data, schedule, tol=tol)
    target = pairing(v, base.mu_eq)

    def value(shift):
        return big_F(data.with_weight(data.phi + shift), schedule, tol)

    jobs = [s * t * v for t in steps for s in (1.0, -1.0)]
    values = _map(value, jobs, threads)
    slopes = [(values[2 * i] - values[2 * i + 1]) / (2 * t) for i, t in enumerate(steps)]
    errors = [abs(s - target) for s in slopes]
    K = abs(slopes[0] - slopes[1]) / (steps[0] - steps[1]) if len(steps) > 1 else 0.0
    if len(steps) > 1:
        # central differences: Richardson with an O(t^2) error model
        t1, t2 = steps[-2], steps[-1]
        extrap = slopes[-1] + (slopes[-1] - slopes[-2]) * t2 ** 2 / (t1 ** 2 - t2 ** 2)
    else:
        extrap = slopes[-1]
    return DerivativeReport(v, steps, slopes, target, abs(extrap - target), K,
                            10 * schedule.ladder_tol if floor is None else floor, errors)


@dataclass
class ConcavityReport:
    ts: list
    values: list
    chords: list
    violations: int
    worst: float
    tol: float = 1e-4

    @property
    def passed(self) -> bool:
        return self.violations == 0

    def as_dict(self) -> dict:
        return {"ts": self.ts, "values": self.values, "chords": self.chords,
                "violations": self.violations, "worst": self.worst, "passed": self.passed}


def concavity_test(data: ProblemData, phi_a: ScalarField, phi_b: ScalarField, samples=3,
                   schedule: BetaSchedule | None = None, tol: float = 1e-10,
                   slack: float = 1e-4, threads: int = 1) -> ConcavityReport:
    """``F(t phi_b + (1-t) phi_a) >= t F(phi_b) + (1-t) F(phi_a) - slack``.

    ``samples`` is either a count (equally spaced interior points) or an
    explicit list of ``t`` values.
    """
    if isinstance(samples, int):
        ts = [k / (samples + 1) for k in range(1, samples + 1)]
    else:
        ts = [float(t) for t in samples]
    weights = [phi_a, phi_b] + [t * phi_b + (1 - t) * phi_a for t in ts]
    values = _map(lambda w: big_F(data.with_weight(w), schedule, tol), weights, threads)
    Fa, Fb, mids = values[0], values[1], values[2:]
    chords = [t * Fb + (1 - t) * Fa for t in ts]
    gaps = [c - m for c, m in zip(chords, mids)]
    return ConcavityReport(ts, mids, chords, sum(g > slack for g in gaps), max(gaps), slack)


@dataclass
class UniquenessReport:
    n_starts: int
    seed: int
    max_potential_distance: float
    max_sum_distance: float
    threshold: float
    beta: float | None = None

    @property
    def passed(self) -> bool:
        return max(self.max_potential_distance, self.max_sum_distance) <= self.threshold

    def as_dict(self) -> dict:
        return {"n_starts": self.n_starts, "seed": self.seed, "beta": self.beta,
                "max_potential_distance": self.max_potential_distance,
                "max_sum_distance": self.max_sum_distance, "threshold": self.threshold,
                "passed": self.passed}


def random_admissible(form: KahlerForm, rng: np.random.Generator, amplitude: float = 0.05):
    """A seeded band-limited potential with ``rho + laplacian(v) > 0``."""
    v = random_band_limited(form.grid, rng, amplitude=amplitude)
    lap = laplacian(v).values
    lo = float((form.density.values + lap).min())
    if lo <= 0.5 * form.density.inf():
        # shrink so the density stays above half its minimum
        scale = 0.5 * form.density.inf() / max(float(np.abs(lap).max()), 1e-300)
        v = scale * v
    return v


def uniqueness_test(data: ProblemData, n_starts: int = 5, schedule: BetaSchedule | None = None,
                    seed: int = 0, beta: float | None = None, tol: float = 1e-10,
                    threads: int = 1, threshold: float | None = None) -> UniquenessReport:
    """Solve from ``n_starts`` random admissible starts and compare the outputs.

    With ``beta`` set, single fixed-``beta`` solves replace the ladder and
    the default threshold is ``100 * tol``; otherwise it is ``1e-4``.
    """
    if n_starts < 2:
        raise ValueError("n_starts must be at least 2")
    rng = np.random.default_rng(seed)
    starts = [[random_admissible(f, rng) for f in data.forms] for _ in range(n_starts)]

    def run(init):
        if beta is not None:
            return solve_beta(data, beta, init=init, tol=tol).potentials
        return solve_extremal(data, schedule, tol=tol, init=init).potentials

    outputs = _map(run, starts, threads)
    sums = [sum(p.values for p in pots) for pots in outputs]
    dist = sum_dist = 0.0
    for a in range(n_starts):
        for b in range(a + 1, n_starts):
            for p, q in zip(outputs[a], outputs[b]):
                dist = max(dist, (p - q).sup_norm())
            sum_dist = max(sum_dist, float(np.abs(sums[a] - sums[b]).max()))
    if threshold is None:
        threshold = 100 * tol if beta is not None else 1e-4
    return UniquenessReport(n_starts, seed, dist, sum_dist, threshold, beta)


@dataclass
class EnergyDerivativeReport:
    steps: list
    slopes: list
    pairing: float
    errors: list
    order: float

    def as_dict(self) -> dict:
        return {"steps": self.steps, "slopes": self.slopes, "pairing": self.pairing,
                "errors": self.errors, "order": self.order}


def energy_derivative_test(theta: KahlerForm, phi: ScalarField, v: ScalarField,
                           steps=(1e-2, 5e-3, 2.5e-3), prefactor: str = "standard"):
    """Central differences of ``E_theta`` along ``v`` against ``int v MA(phi)``.

    ``order`` is the observed convergence order of the error (``nan`` when
    the error is already at round-off, as for the quadratic energy in
    dimension 1).
    """
    target = pairing(v, ma_measure(theta, phi))
    slopes = [(energy(theta, phi + t * v, prefactor) - energy(theta, phi - t * v, prefactor))
              / (2 * t) for t in steps]
    errors = [abs(s - target) for s in slopes]
    order = float("nan")
    if len(steps) > 1 and errors[-1] > 1e-13 and errors[-2] > 1e-13:
        order = float(np.log(errors[-2] / errors[-1]) / np.log(steps[-2] / steps[-1]))
    return EnergyDerivativeReport(list(steps), slopes, target, errors, order)


def mass_defect(theta: KahlerForm, phi: ScalarField) -> float:
    """Relative gap between the integrated Monge-Ampère measure and ``V``."""
    return abs(integrate(ma_measure(theta, phi, check=False).density) - theta.mass) / theta.mass
