from nse_dynamics.attractor import (
    SpinUpError,
    attractor_bounds,
    energy_budget,
    in_absorbing_ball,
    spin_up_to_absorbing,
)
from nse_dynamics.models import (
    AttractorBounds,
    Forcing,
    InsufficientSpanError,
    Integrator,
    SolverConfig,
    SpinUpResult,
    Trajectory,
)
from nse_dynamics.solver import (
    BlowUpError,
    grashof,
    integrate,
    make_kolmogorov_forcing,
    step,
)

__all__ = [
    "AttractorBounds",
    "BlowUpError",
    "Forcing",
    "InsufficientSpanError",
    "Integrator",
    "SolverConfig",
    "SpinUpError",
    "SpinUpResult",
    "Trajectory",
    "attractor_bounds",
    "energy_budget",
    "grashof",
    "in_absorbing_ball",
    "integrate",
    "make_kolmogorov_forcing",
    "spin_up_to_absorbing",
    "step",
]
