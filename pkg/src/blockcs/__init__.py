"""Block-sparse compressed sensing with rate-allocated quantization.

The package covers the full pipeline: a Gaussian-mixture block source,
unit-column Gaussian sensing, optimal bit allocation across mixture
components, quantization-noise moment models, probabilistic reconstruction
error bounds, a first-order block basis-pursuit solver with a compiled
core, and a Monte Carlo harness that reproduces the bound-versus-
simulation sweeps.
"""

__version__ = "0.1.0"

from .errors import (
    BoundNotApplicableError,
    ConfigurationError,
    InfeasibleProblemError,
    RankDeficiencyError,
)
from .model import (
    ChannelSpec,
    MixtureComponent,
    SensingMatrix,
    SourceModel,
    SparseVector,
    block_sparsity,
    enumerate_components,
    make_rng,
    measure,
    sample_sensing_matrix,
    sample_source,
    source_energy,
)
from .gmvq import (
    ComponentMass,
    NoiseMoments,
    RateAllocation,
    component_distortion,
    component_logdet,
    delta4_closed_form,
    epsilon_radius,
    mixture_logdets,
    noise_moments,
    optimal_allocation,
    quantization_step,
    shape_constant,
    simulate_quantization,
)
from .bounds import (
    DELTA_CRITICAL,
    BoundResult,
    RipEstimate,
    bpdn_guarantee_constant,
    bpdn_upper_bound,
    cantelli_margin,
    estimate_block_rip,
    exceedance_probability,
    oracle_lower_bound,
)
from .solvers import (
    SOLVER_BACKEND,
    BpdnOptions,
    KktReport,
    Reconstruction,
    certify_kkt,
    group_shrink,
    oracle_ls,
    solve_block_bpdn,
    true_support,
)
from .harness import (
    ExperimentConfig,
    SweepTable,
    TrialRecord,
    apply_dotted_overrides,
    default_config,
    median,
    run_sweep,
    run_trial,
    srnr_db,
)

__all__ = [
    "__version__",
    "BoundNotApplicableError",
    "ConfigurationError",
    "InfeasibleProblemError",
    "RankDeficiencyError",
    "ChannelSpec",
    "MixtureComponent",
    "SensingMatrix",
    "SourceModel",
    "SparseVector",
    "block_sparsity",
    "enumerate_components",
    "make_rng",
    "measure",
    "sample_sensing_matrix",
    "sample_source",
    "source_energy",
    "ComponentMass",
    "NoiseMoments",
    "RateAllocation",
    "component_distortion",
    "component_logdet",
    "delta4_closed_form",
    "epsilon_radius",
    "mixture_logdets",
    "noise_moments",
    "optimal_allocation",
    "quantization_step",
    "shape_constant",
    "simulate_quantization",
    "DELTA_CRITICAL",
    "BoundResult",
    "RipEstimate",
    "bpdn_guarantee_constant",
    "bpdn_upper_bound",
    "cantelli_margin",
    "estimate_block_rip",
    "exceedance_probability",
    "oracle_lower_bound",
    "SOLVER_BACKEND",
    "BpdnOptions",
    "KktReport",
    "Reconstruction",
    "certify_kkt",
    "group_shrink",
    "oracle_ls",
    "solve_block_bpdn",
    "true_support",
    "ExperimentConfig",
    "SweepTable",
    "TrialRecord",
    "apply_dotted_overrides",
    "default_config",
    "median",
    "run_sweep",
    "run_trial",
    "srnr_db",
]
