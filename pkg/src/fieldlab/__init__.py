"""fieldlab: radial shooting laboratory for scalar-field and Kirchhoff-type
elliptic equations.

Solves -Lap(v) = f(v) radially by shooting, verifies the structural
identities of the solutions (Pohozaev, Nehari, strong form), and transfers
them to solutions of -M(grad-norm^2) Lap(u) = f(u) through the scalar root
equation M(t^(2-N) g) t^2 = 1.
"""

__version__ = "0.1.0"

from .nonlinearity import (
    ConditionReport,
    ConfigError,
    KirchhoffFunction,
    Nonlinearity,
    SamplingGrid,
    check_f_conditions,
    check_m_conditions,
    make_affine_m,
    make_constant_m,
    make_exp_m,
    make_power_m,
    make_power_nonlinearity,
    make_tabulated_nonlinearity,
)
from .envelope import (
    Envelope,
    aux_problem_nonlinearity,
    build_envelope,
    default_p0,
    export_envelope_csv,
    verify_lemma_21_22,
)
from .shooting import (
    IntegratorOptions,
    InvariantViolation,
    NumericalError,
    RadialProfile,
    TailModel,
    Trajectory,
    dead_zone,
    find_bound_state,
    integrate_ivp,
    solution_family,
)
from .functionals import (
    FunctionalReport,
    energy_aux,
    energy_kt,
    energy_sf,
    functional_report,
    grad_norm_sq,
    integral_F,
    l2_norm_sq,
    nehari_residual,
    pohozaev_residual,
    radial_integral,
    scaled_energy,
    dtheta_scaled_energy,
    sphere_area,
    strong_residual,
)
from .transfer import (
    MultiplicityTable,
    TransferResult,
    build_kt_solution,
    multiplicity_sweep,
    q_threshold,
    solve_transfer,
    transfer_map,
)

__all__ = [name for name in dir() if not name.startswith("_")]
