"""The beta ladder: warm-started solves with ``beta -> infinity``.

The last rung's potentials approximate the extremal potentials, and their
common normalized Monge-Ampère measure approximates the equilibrium measure.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .beta import BetaSolution, predict, solve_beta
from .energy import MeasureDensity, energy, f_phi_beta, ma_measure
from .errors import (BoundViolated, ExponentClampWarning, LadderStalled, NoConvergence)
from .grid import ScalarField, gradient_sup, integrate, laplacian
from .problem import ProblemData

# first eigenvalue of -Delta on the unit torus
FIRST_EIGENVALUE = 4.0 * np.pi ** 2


@dataclass(frozen=True)
class BetaSchedule:
    beta0: float = 1.0
    growth: float = 4.0
    beta_max: float = 4.0 ** 10
    ladder_tol: float = 1e-5

    def __post_init__(self):
        if not self.beta0 > 0:
            raise ValueError("beta0 must be positive")
        if not self.growth > 1:
            raise ValueError("growth must exceed 1")
        if not self.beta_max >= self.beta0:
            raise ValueError("beta_max must be >= beta0")

    def betas(self) -> list:
        out = [float(self.beta0)]
        while out[-1] * self.growth <= self.beta_max * (1 + 1e-12):
            out.append(out[-1] * self.growth)
        return out


@dataclass(eq=False)
class ExtremalResult:
    potentials: tuple
    mu_eq: MeasureDensity
    beta_final: float
    ladder_history: list
    admissibility: dict
    measure_spread: float
    schedule: BetaSchedule
    converged: bool = True
    assertions: dict = field(default_factory=dict)

    @property
    def total(self) -> ScalarField:
        s = self.potentials[0]
        for p in self.potentials[1:]:
            s = s + p
        return s


def _sum(potentials):
    s = potentials[0]
    for p in potentials[1:]:
        s = s + p
    return s


def _normalized_measures(data, potentials):
    return [ma_measure(f, p, check=False).density.values / f.mass
            for f, p in zip(data.forms, potentials)]


def _pairwise_spread(arrays) -> float:
    worst = 0.0
    for a in range(len(arrays)):
        for b in range(a + 1, len(arrays)):
            worst = max(worst, float(np.abs(arrays[a] - arrays[b]).max()))
    return worst


def _rung_record(data, sol: BetaSolution, prev, prefactor):
    gap = (sol.total - data.phi).sup()
    increment = np.inf if prev is None else max(
        (p - q).sup_norm() for p, q in zip(sol.potentials, prev.potentials))
    return {
        "beta": sol.beta,
        "sup_gap": gap,
        "sum_bound": sol.beta * gap,
        "energies": [energy(f, p, prefactor) for f, p in zip(data.forms, sol.potentials)],
        "f_value": f_phi_beta(sol.potentials, data, sol.beta, prefactor),
        "laplacian_sups": [laplacian(p).sup_norm() for p in sol.potentials],
        "gradient_sups": [gradient_sup(p) for p in sol.potentials],
        "residual": sol.residual_sup,
        "residual_floor": sol.residual_floor,
        "newton_iters": sol.newton_iters,
        "exponent_clamped": sol.exponent_clamped,
        "increment": float(increment),
    }


def solve_extremal(data: ProblemData, schedule: BetaSchedule | None = None, tol: float = 1e-10,
                   init=None, max_newton: int = 60, prefactor: str = "standard",
                   on_rung=None) -> ExtremalResult:
    """Run the beta ladder and return the last rung as the extremal solution.

    Stops once every potential moves by at most ``schedule.ladder_tol``
    between consecutive rungs, or at ``beta_max``.  A rung that fails is
    skipped (the next one starts from the last good rung); two failures in
    a row raise :class:`LadderStalled` carrying the best result so far.
    ``on_rung(record, solution)`` is called after every converged rung.
    """
    schedule = schedule or BetaSchedule()
    history = []
    prev = None
    failures = 0
    stop_reason = "beta_max"
    for beta in schedule.betas():
        start = init if prev is None else predict(prev, data, beta)
        try:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", ExponentClampWarning)
                sol = solve_beta(data, beta, init=start, tol=tol, max_newton=max_newton)
        except NoConvergence as exc:
            failures += 1
            history.append({"beta": beta, "failed": True, "error": str(exc),
                            "diagnostics": exc.diagnostics})
            if failures >= 2:
                best = None if prev is None else _finish(data, prev, history, schedule, prefactor,
                                                         converged=False)
                raise LadderStalled(f"two consecutive rungs failed (last beta={beta:g})",
                                    result=best) from exc
            continue
        failures = 0
        record = _rung_record(data, sol, prev, prefactor)
        history.append(record)
        if on_rung is not None:
            on_rung(record, sol)
        prev = sol
        if record["increment"] <= schedule.ladder_tol:
            stop_reason = "ladder_tol"
            break
    if prev is None:
        raise LadderStalled("no rung converged")
    result = _finish(data, prev, history, schedule, prefactor, converged=True)
    result.assertions["stop_reason"] = stop_reason
    return result


def _finish(data, sol, history, schedule, prefactor, converged):
    potentials = sol.potentials
    measures = _normalized_measures(data, potentials)
    mu = MeasureDensity(ScalarField(data.grid, measures[0]), 1.0)
    spread = _pairwise_spread(measures)
    gap = _sum(potentials) - data.phi
    admissibility = {
        "max_violation": max(0.0, gap.sup()),
        "support_residual": abs(integrate((-gap) * mu.density)),
    }
    result = ExtremalResult(potentials, mu, sol.beta, history, admissibility, spread, schedule,
                            converged)
    result.assertions["mass_one"] = abs(integrate(mu.density) - 1.0) <= 1e-10
    result.assertions["measure_spread"] = spread <= 10 * schedule.ladder_tol
    result.assertions["normalized"] = all(abs(p.sup()) <= 1e-12 for p in potentials[1:])
    return result


@dataclass
class ConditionsReport:
    measure_equality: float
    admissibility: float
    support: float
    tol: float

    @property
    def passed(self) -> bool:
        return max(self.measure_equality, self.admissibility, self.support) <= self.tol

    def as_dict(self) -> dict:
        return {"measure_equality": self.measure_equality, "admissibility": self.admissibility,
                "support": self.support, "tol": self.tol, "passed": self.passed}


def check_conditions(potentials, data: ProblemData, tol: float = 1e-3) -> ConditionsReport:
    """Residuals of the three defining conditions, recomputed from the fields.

    ``potentials`` may be an :class:`ExtremalResult` or a list of fields.
    The support condition is used in the weak form
    ``|int (phi - sum phi_j) d mu_eq|``, with ``mu_eq`` taken from the first
    form; the absolute value also catches potentials that overshoot ``phi``.
    """
    if isinstance(potentials, ExtremalResult):
        potentials = potentials.potentials
    measures = _normalized_measures(data, potentials)
    gap = (_sum(potentials) - data.phi).values
    vol = data.grid.cell_volume
    return ConditionsReport(
        measure_equality=_pairwise_spread(measures),
        admissibility=float(max(0.0, gap.max())),
        support=float(abs(vol * np.sum(-gap * measures[0]))),
        tol=tol,
    )


def _successful(history):
    return [r for r in history if not r.get("failed")]


def sum_bound_monitor(result: ExtremalResult, factor: float = 2.0, raise_on_fail: bool = True):
    """The series ``beta * sup(sum phi_j^beta - phi)`` along the ladder.

    Checks that it stays below ``factor`` times its maximum over the first
    three rungs; raises :class:`BoundViolated` otherwise.
    """
    series = np.array([r["sum_bound"] for r in _successful(result.ladder_history)])
    if series.size == 0:
        raise ValueError("empty ladder history")
    bound = factor * max(0.0, float(series[:3].max()))
    if float(series.max()) > bound + 1e-12 and raise_on_fail:
        raise BoundViolated(f"sum bound {series.max():.4g} exceeds {bound:.4g}", series, bound)
    return series


def reference_rungs(result: ExtremalResult, data: ProblemData, mode: str = "first") -> list:
    """Indices of the three reference rungs for a bounded-series check.

    ``"first"`` takes the first three rungs.  ``"saturated"`` takes the first
    three with ``beta * lam >= 4 pi^2`` (``lam`` the total mass): below that
    scale the solution is still in the linear-response regime, where
    derivative norms grow linearly in ``beta`` before levelling off.
    """
    rungs = _successful(result.ladder_history)
    if mode == "first":
        return list(range(min(3, len(rungs))))
    if mode != "saturated":
        raise ValueError("mode must be 'first' or 'saturated'")
    lam = float(data.masses.sum())
    idx = [i for i, r in enumerate(rungs) if r["beta"] * lam >= FIRST_EIGENVALUE]
    return idx[:3] if len(idx) >= 3 else list(range(max(0, len(rungs) - 3), len(rungs)))


def bounded_series(series, ref, factor: float = 2.0) -> dict:
    series = np.asarray(series, dtype=float)
    bound = factor * float(series[ref].max()) if len(ref) else np.inf
    return {"series": series.tolist(), "reference": list(ref), "bound": bound,
            "passed": bool(series.max() <= bound + 1e-12)}


def regularity_report(data: ProblemData, result: ExtremalResult, tol: float = 1e-8) -> dict:
    """Density, gradient and Laplacian sups of the solution and along the ladder.

    (a) envelope density sup for the summed form (dimension 1 only),
    (b) sup of the equilibrium density, (c) per-potential gradient and
    Laplacian sups, (d) ladder increments.  The Laplacian series is checked
    for boundedness against both reference-rung choices of
    :func:`reference_rungs`.
    """
    from .envelope import sum_form_envelope

    rungs = _successful(result.ladder_history)
    env_sup = None
    if data.grid.ndim == 1:
        try:
            env_sup = sum_form_envelope(data, tol=tol).density_sup
        except NoConvergence as exc:
            env_sup = float((data.summed_form().density + laplacian(exc.best)).sup())
    mu_sup = result.mu_eq.density.sup()
    lap_series = [max(r["laplacian_sups"]) for r in rungs]
    report = {
        "envelope_density_sup": env_sup,
        "mu_density_sup": mu_sup,
        "gradient_sups": [gradient_sup(p) for p in result.potentials],
        "laplacian_sups": [laplacian(p).sup_norm() for p in result.potentials],
        "increments": [r["increment"] for r in rungs],
        "laplacian_bound": {
            mode: bounded_series(lap_series, reference_rungs(result, data, mode))
            for mode in ("first", "saturated")
        },
    }
    report["density_finite"] = bool(env_sup is None or not np.isfinite(env_sup)
                                    or np.isfinite(mu_sup))
    return report
