"""Spectral fractional Laplacians, phase-field saddle dynamics, and solution
landscapes on periodic grids."""

from .errors import (
    CapacityError,
    ConfigError,
    ContractError,
    DegeneracyError,
    DomainError,
    GridMismatchError,
    UnsupportedModelError,
)
from .fracop import (
    ConstantOrder,
    ExpansionPlan,
    MuSolution,
    VariableOrder,
    build_expansion,
    constant_order_apply,
    load_plan,
    remainder_probe,
    save_plan,
    select_expansion_order,
    solve_mu,
    variable_order_apply_direct,
    variable_order_apply_fast,
)
from .grid import (
    GridSpec,
    RealField,
    SpectralField,
    forward_transform,
    inner,
    inverse_transform,
    multiplier,
    norm,
)
from .landscape import (
    LandscapeGraph,
    LandscapeNode,
    SearchPlan,
    build_landscape,
    canonicalize,
    downward_search,
    index_sweep,
    match_constant_order,
    match_variable_order,
    upward_search,
)
from .phasefield import (
    DimerParams,
    ModelParams,
    energy,
    homogeneous_index,
    jacobian_apply,
    rhs,
)
from .saddle import (
    ConvergenceReport,
    SaddleConfig,
    SaddleState,
    compute_index,
    initial_directions,
    orthonormalize,
    run,
    step,
)

__version__ = "0.1.0"
