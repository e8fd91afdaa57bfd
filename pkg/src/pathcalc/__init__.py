"""pathcalc: calculus for non-anticipative functionals of stopped paths.

The package covers four layers: path containers and their metric
(:mod:`pathcalc.paths`), a catalog of scalar functionals with closed-form
derivatives (:mod:`pathcalc.functionals`), two numerical derivative engines
(endpoint jets in :mod:`pathcalc.dupire`, measure representations in
:mod:`pathcalc.frechet`), and an Euler scheme plus verification harnesses
for path-dependent dynamics (:mod:`pathcalc.sfde`, :mod:`pathcalc.verify`).
"""

from .dupire import (
    DupireJet,
    FdConfig,
    default_vertical_step,
    horizontal_derivative,
    numerical_dupire_jet,
    vertical_derivative,
    vertical_hessian,
)
from .errors import (
    BlowUpError,
    BoundaryError,
    CausalityError,
    DomainError,
    EvaluationError,
    GridAlignmentError,
    MissingProviderError,
    NonConvergenceError,
    PathcalcError,
    UnknownIdError,
)
from .frechet import (
    DEFAULT_RAMP_KS,
    RampFamily,
    RieszRepresentation,
    apply_extended_derivative,
    atom_at_t,
    bilinear_atom_at_t,
    directional_derivative,
    estimate_riesz_measure,
    hat_direction,
    ramp_direction,
    second_directional_derivative,
    time_derivative,
)
from .functionals import (
    CATALOG_IDS,
    Functional,
    check_non_anticipative,
    functional_ids,
    get_functional,
    register,
)
from .models import (
    BatchStepper,
    SfdeModel,
    get_model,
    model_ids,
    random_bounded_model,
    register_model,
)
from .parallel import run_tasks, worker_count
from .paths import (
    StoppedPath,
    TimeGrid,
    d_infinity,
    horizontal_extend,
    load_path_csv,
    save_path_csv,
    stop_at,
    sup_norm,
    vertical_bump,
)
from .reports import (
    coherence_csv,
    convergence_csv,
    emit_report,
    format_float,
    json_text,
    report_json_payload,
)
from .rng import NoisePlan, coarsen_increments, substream
from .sfde import (
    BLOW_UP_LIMIT,
    McEstimate,
    ProbeReport,
    check_bounded,
    check_lipschitz,
    euler_solve,
    mc_expectation,
    simulate_ensemble,
)
from .verify import (
    CoherenceReport,
    ConvergenceReport,
    coherence_report,
    generator_lhs,
    generator_rhs_dupire,
    generator_rhs_frechet,
    ito_convergence_study,
    ito_residual,
    ito_residuals,
    strong_convergence_study,
)
from .acceptance import (
    CRITERION_NAMES,
    CriterionResult,
    format_result,
    load_manifest,
    run_acceptance,
)

__version__ = "0.1.0"

__all__ = [
    "__version__",
    # paths
    "TimeGrid",
    "StoppedPath",
    "stop_at",
    "vertical_bump",
    "horizontal_extend",
    "sup_norm",
    "d_infinity",
    "save_path_csv",
    "load_path_csv",
    # functionals
    "Functional",
    "check_non_anticipative",
    "register",
    "get_functional",
    "functional_ids",
    "CATALOG_IDS",
    # endpoint jets
    "FdConfig",
    "DupireJet",
    "default_vertical_step",
    "vertical_derivative",
    "vertical_hessian",
    "horizontal_derivative",
    "numerical_dupire_jet",
    # measure representations
    "RieszRepresentation",
    "RampFamily",
    "DEFAULT_RAMP_KS",
    "directional_derivative",
    "second_directional_derivative",
    "time_derivative",
    "hat_direction",
    "ramp_direction",
    "estimate_riesz_measure",
    "atom_at_t",
    "bilinear_atom_at_t",
    "apply_extended_derivative",
    # models and simulation
    "SfdeModel",
    "BatchStepper",
    "get_model",
    "model_ids",
    "register_model",
    "random_bounded_model",
    "BLOW_UP_LIMIT",
    "McEstimate",
    "euler_solve",
    "simulate_ensemble",
    "mc_expectation",
    "ProbeReport",
    "check_bounded",
    "check_lipschitz",
    # noise and parallelism
    "NoisePlan",
    "substream",
    "coarsen_increments",
    "worker_count",
    "run_tasks",
    # verification
    "ConvergenceReport",
    "CoherenceReport",
    "ito_residual",
    "ito_residuals",
    "ito_convergence_study",
    "strong_convergence_study",
    "generator_lhs",
    "generator_rhs_dupire",
    "generator_rhs_frechet",
    "coherence_report",
    # reporting
    "format_float",
    "json_text",
    "convergence_csv",
    "coherence_csv",
    "report_json_payload",
    "emit_report",
    # acceptance
    "CriterionResult",
    "load_manifest",
    "run_acceptance",
    "format_result",
    "CRITERION_NAMES",
    # errors
    "PathcalcError",
    "GridAlignmentError",
    "DomainError",
    "BoundaryError",
    "EvaluationError",
    "BlowUpError",
    "CausalityError",
    "NonConvergenceError",
    "MissingProviderError",
    "UnknownIdError",
]
