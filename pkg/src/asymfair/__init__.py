"""Envy-free and Pareto-optimal allocation of stochastic items via
approximately equalizing multipliers."""
from .allocate import (
    PipelineConfig,
    approximate_multiplier_pipeline,
    max_percentile_allocation,
    multiplier_allocation,
    normalizing_multiplier_allocation,
    round_robin,
    rounded_mnw_allocation,
    welfare_max_allocation,
)
from .distributions import Beta, Peak, PiecewiseUniform, make_peak, piecewise_uniform, uniform
from .errors import (
    AsymfairError,
    ConvergenceError,
    DegenerateError,
    DomainError,
    GridSearchError,
    NonTerminationError,
    QuadratureError,
    SizeGuardError,
    SolverError,
)
from .experiments import ExperimentConfig, confidence_interval, emit_results, run_experiment
from .fairness import (
    find_pareto_improvement,
    fpo_certificate_check,
    is_ef1,
    is_envy_free,
    is_pareto_optimal_bruteforce,
)
from .instance import Instance
from .mnw import fractional_mnw, integer_mnw_bruteforce, round_fractional
from .probability import ProbabilityOracle, gap_constant, resulting_probabilities
from .profiles import Profile, load_profile, standard_profiles
from .solver import SolverConfig, equalize, equalize_annealed, equalize_fixed_eps
from .sperner import sperner_grid_search

__version__ = "0.1.0"
