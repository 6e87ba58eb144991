"""High-order Markov chains of the mixture-transition-distribution type for
signed order-flow events: simulation, moment and likelihood estimation,
correlation and signature-plot diagnostics, rolling forecast evaluation."""

from .backtest import EpeReport, epe_loss, predict_distribution, rolling_backtest
from .diagnostics import (SignatureConfig, correlation_report, diffusivity_increments, fit_dlf,
                          signature_plot)
from .errors import (DomainError, IdentifiabilityError, ModelLoadError, MtdgError, NumericError,
                     OptimizationError, OrderingError, ParseError, ResourceError)
from .gmm import build_gmm_system, factorize_identifiable, fit_gmm, solve_weakly_constrained
from .model import (EPS_FEAS, BivariateSet, EventSequence, MtdgModel, StateSpace,
                    conditional_distribution, random_weak_model, simulate, stationary_distribution,
                    theoretical_bivariate, validate_model)
from .moments import (CorrelationSet, estimate_bivariate, estimate_stationary, model_correlations,
                      signed_event_correlations)
from .strong import StrongParams, build_strong_model, extract_strong, fit_mle, log_likelihood

__version__ = "0.1.0"

__all__ = [
    "EPS_FEAS", "BivariateSet", "CorrelationSet", "DomainError", "EpeReport", "EventSequence",
    "IdentifiabilityError", "ModelLoadError", "MtdgError", "MtdgModel", "NumericError",
    "OptimizationError", "OrderingError", "ParseError", "ResourceError", "SignatureConfig",
    "StateSpace", "StrongParams", "build_gmm_system", "build_strong_model",
    "conditional_distribution", "correlation_report", "diffusivity_increments", "epe_loss",
    "estimate_bivariate", "estimate_stationary", "extract_strong", "factorize_identifiable",
    "fit_dlf", "fit_gmm", "fit_mle", "log_likelihood", "model_correlations",
    "predict_distribution", "random_weak_model", "rolling_backtest", "signature_plot", "signed_event_correlations",
    "simulate", "solve_weakly_constrained", "stationary_distribution", "theoretical_bivariate",
    "validate_model",
]
