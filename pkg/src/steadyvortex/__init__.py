"""Concentrated steady vortex patches in bounded planar domains.

Vortex patches of small circulation κ are computed as maximizers of a
kinetic-energy functional over bounded vorticities of fixed mass, discretized
on a uniform lattice.  The package provides the domain and Green operator,
the profile and strength schedules, the maximizer, and diagnostics that track
how the solution concentrates as κ decreases.
"""

from .domain import DomainSpec, Domain, VortexSite, build_domain, ball_mask, validate_sites
from .elliptic import (
    DISK_KERNEL,
    FD,
    ScalarField,
    dirichlet_extend,
    green_apply,
    harmonic_from_flux,
    velocity_field,
)
from .profiles import Profile, StrengthSchedule, check_hypotheses, check_schedule, load_table
from .variational import (
    MultiProblemSpec,
    ProblemSpec,
    SiteSpec,
    SolverControls,
    energy,
    feasibility_check,
    first_order_residuals,
    maximize,
    maximize_multi,
    multiplier_solve,
)
from .diagnostics import kappa_sweep, support_metrics, sweep_csv, sweep_multi, weak_residual
from .oracle import oracle_maximize
from .errors import *  # noqa: F401,F403

__version__ = "0.1.0"
