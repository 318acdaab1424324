"""Nested two-scale model of respiratory viral transmission.

A within-host viral dynamics model is reduced to a single infectiousness
constant ``N_h`` (area under the viral load curve), which parameterises a
between-host SEI epidemic model.  The package provides simulation, threshold
and stability analysis, sensitivity indices, parameter sweeps and an
intervention comparison, plus a command line front end.
"""

from .analysis import bifurcation_quantities, compute_R0, equilibria, routh_hurwitz
from .between_host import BetweenHostParams, BetweenHostState, baseline_between_host, simulate_between_host
from .coupling import CouplingSummary, compute_Nh, compute_Nm, coupling_summary
from .integrator import IntegratorConfig, OdeSystem, Trajectory, integrate
from .interventions import InterventionEfficacies, effective_R, effectiveness_table, pct_reduction
from .sensitivity import elasticity_closed_form, elasticity_finite_difference
from .sweeps import bifurcation_sweep, heat_grid, within_host_influence
from .within_host import BASELINE_WITHIN_HOST, BASELINE_WITHIN_HOST_INITIAL, WithinHostParams, WithinHostState, simulate_within_host

__version__ = "0.1.0"
