"""Memory stochastic stratified gradient estimator and the MSTGD optimizer."""

from ._mstgd import (
    blend_general,
    blend_equal_mean,
    stationary_variance,
    scripted_moments,
    dominance_threshold,
    estimator_accuracy,
    population_rounds,
    train_quadratic,
    train_digits,
    verify_suite,
    dataset_kinds,
)

__all__ = [
    "blend_general",
    "blend_equal_mean",
    "stationary_variance",
    "scripted_moments",
    "dominance_threshold",
    "estimator_accuracy",
    "population_rounds",
    "train_quadratic",
    "train_digits",
    "verify_suite",
    "dataset_kinds",
]
