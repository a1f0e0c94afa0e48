"""Task-specific hybrid beamforming receivers with low-resolution ADCs.

The analog combiner is restricted to the gains a Cartesian vector modulator
can realise and is designed jointly with a linear digital stage to recover
the desired source symbols, while suppressing interferers in the analog
domain. See ``demos/`` for walkthroughs.
"""

from taskbeam.constellation import (
    IdealConstellation,
    MismatchedConstellation,
    MismatchParams,
    build_ideal,
    build_mismatched,
    project_ideal,
    project_mismatched,
    sparsity_fraction,
)
from taskbeam.design import DesignError, DesignParams, DesignResult, algorithm1, digital_filter, ex_mse, int_rej
from taskbeam.evaluation import (
    PowerProfile,
    af_sweep,
    array_factor,
    benchmark_fully_digital,
    benchmark_task_agnostic,
    monte_carlo_mse,
    power_fully_digital,
    power_hybrid,
)
from taskbeam.quantization import AdcModel, adc_convert, kappa, levels_for_budget, midtread_quantize, total_bits
from taskbeam.robust import RobustParams, UncertaintyModel, algorithm2, aoa_grid, mse_full, worst_case_mse
from taskbeam.scenario import (
    CovarianceBundle,
    Scenario,
    build_covariances,
    mmse_floor,
    reference_scenario,
    second_setup,
    steering_vector,
)

__version__ = "0.1.0"

__all__ = [
    "AdcModel",
    "CovarianceBundle",
    "DesignError",
    "DesignParams",
    "DesignResult",
    "IdealConstellation",
    "MismatchParams",
    "MismatchedConstellation",
    "PowerProfile",
    "RobustParams",
    "Scenario",
    "UncertaintyModel",
    "adc_convert",
    "af_sweep",
    "algorithm1",
    "algorithm2",
    "aoa_grid",
    "array_factor",
    "benchmark_fully_digital",
    "benchmark_task_agnostic",
    "build_covariances",
    "build_ideal",
    "build_mismatched",
    "digital_filter",
    "ex_mse",
    "int_rej",
    "kappa",
    "levels_for_budget",
    "midtread_quantize",
    "mmse_floor",
    "monte_carlo_mse",
    "mse_full",
    "reference_scenario",
    "power_fully_digital",
    "power_hybrid",
    "project_ideal",
    "project_mismatched",
    "second_setup",
    "sparsity_fraction",
    "steering_vector",
    "total_bits",
    "worst_case_mse",
]
