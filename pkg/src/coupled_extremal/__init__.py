"""Coupled extremal potentials and equilibrium measures on flat tori.

The potentials are computed as the ``beta -> infinity`` limit of a
thermodynamic regularization; an independent obstacle-problem solver
provides the single-form envelope as an oracle.
"""

__version__ = "0.1.0"

from .beta import BetaSolution, maximizer_check, solve_beta, solve_beta_nd
from .continuation import (BetaSchedule, ExtremalResult, check_conditions, regularity_report,
                           solve_extremal, sum_bound_monitor)
from .energy import MeasureDensity, energy, f_phi, f_phi_beta, ma_measure, pairing
from .envelope import EnvelopeSolution, contact_set, project, sum_form_envelope
from .errors import *  # noqa: F401,F403
from .fieldio import dump_field, load_field
from .grid import Grid, ScalarField, laplacian, poisson_solve
from .problem import (KahlerForm, ProblemData, Weight, flat_form, form_from_potential,
                      matrix_form, max_of_smooth, validate)
from .verification import (big_F, concavity_test, differentiability_test,
                           energy_derivative_test, uniqueness_test)
