"""Continuous-fidelity Gaussian-process surrogates with cost-aware active learning."""

__version__ = "0.1.0"

from .active import ALConfig, CriterionOptions, FitOptions, rmse, run_al, run_one_shot, run_single_fidelity  # noqa: E402
from .designs import DesignKind, DesignPlan, budget_design  # noqa: E402
from .exceptions import (CFGPError, ConfigError, DegenerateCandidate, FitFailure, InvalidArgumentError,  # noqa: E402
                         NumericalError, OptimizationFailure, SimulatorError, StateError)
from .gp import Dataset, FittedModel, TrendBasis, TrendKind, posterior  # noqa: E402
from .imspe import ImspeState, criterion, imspe_closed, imspe_reduction, optimize_criterion  # noqa: E402
from .inference import FitReport, ModelConfig, fisher_information, fit_mle, fit_model  # noqa: E402
from .kernels import CombinedCovSpec, CorrelationSpec, Family, FidelityKernelSpec  # noqa: E402
from .simulators import CostModel, gp_draw, make_simulator  # noqa: E402

__all__ = [
    "ALConfig", "CFGPError", "CombinedCovSpec", "ConfigError", "CorrelationSpec", "CostModel", "CriterionOptions",
    "Dataset", "DegenerateCandidate", "DesignKind", "DesignPlan", "Family", "FidelityKernelSpec", "FitFailure",
    "FitOptions", "FitReport", "FittedModel", "ImspeState", "InvalidArgumentError", "ModelConfig",
    "NumericalError", "OptimizationFailure", "SimulatorError", "StateError", "TrendBasis", "TrendKind",
    "budget_design", "criterion", "fisher_information", "fit_mle", "fit_model", "gp_draw", "imspe_closed",
    "imspe_reduction", "make_simulator", "optimize_criterion", "posterior", "rmse", "run_al", "run_one_shot",
    "run_single_fidelity",
]
