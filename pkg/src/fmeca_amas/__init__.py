"""FMECA criticality analysis with cooperative multi-agent selection of preventive actions."""

from importlib import resources

from .core import (
    Configuration, Diagnostic, Dimension, FailureMode, FmecaModel, Level, Mitigation, Objective,
    PreventiveAction, RatingScale, ValidationError, criticality, evaluate, is_critical, objective,
    residual_criticality, residual_ranks, total_cost, validate,
)

__version__ = "0.1.0"


def sample_path(name: str = "generator_sample.json"):
    """Path-like handle to a bundled sample model."""
    return resources.files(__package__).joinpath("samples", name)


__all__ = [
    "Configuration", "Diagnostic", "Dimension", "FailureMode", "FmecaModel", "Level", "Mitigation",
    "Objective", "PreventiveAction", "RatingScale", "ValidationError", "criticality", "evaluate",
    "is_critical", "objective", "residual_criticality", "residual_ranks", "sample_path", "total_cost",
    "validate",
]
