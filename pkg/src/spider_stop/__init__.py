"""
Optimal stopping of discounted diffusion spiders.

A diffusion spider moves along ``n`` half-lines glued at a common vertex and
picks leg ``k`` with probability ``p_k`` at every visit of the vertex.  The
package provides the resolvent kernel and hitting-time transforms, tests for
r-excessivity via representing measures, solvers for threshold-type stopping
problems with verification, and a Monte Carlo cross-check.
"""
from .diffusion import (
    VERTEX,
    CharacteristicsReport,
    DiffusionCharacteristics,
    LegFunction,
    SpiderModel,
    SpiderPoint,
    available_characteristics,
    brownian_characteristics,
    drifted_brownian_characteristics,
    get_characteristics,
    register_characteristics,
    validate_characteristics,
)
from .numerics import (
    ConvergenceError,
    IntegrationError,
    NumericalError,
    RootNotBracketed,
    find_root_bracketed,
    integrate_leg,
    solve_system,
)
from .kernels import (
    Branch,
    GreenKernelValue,
    green_kernel,
    harmonic_function,
    hitting_laplace,
    minimal_excessive,
    psi_tilde,
    skew_psi,
    transition_density_brownian,
)
from .excessive import (
    ExcessivityReport,
    RepresentingMeasure,
    RewardDecomposition,
    finiteness_check,
    gluing_value,
    is_excessive,
    representing_measure_at_vertex,
    representing_measure_offvertex,
    reward_decomposition,
)
from .osp import (
    LegSet,
    StoppingRegion,
    StoppingSolution,
    ThresholdFamily,
    VerificationReport,
    assemble_value,
    boundary_residual,
    example71_payoff,
    resolvent_apply,
    riesz_value,
    smooth_fit_check,
    solve_example71,
    solve_spider_example71,
    solve_threshold_system,
    uniqueness_sweep,
    verify_solution,
    vertex_in_continuation,
)
from .simulator import (
    EstimateWithError,
    SimConfig,
    simulate_discounted_stop,
    simulate_hitting_laplace,
    simulate_resolvent,
)

__version__ = "0.1.0"
