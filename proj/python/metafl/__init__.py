"""Federated learning simulator with a meta-aggregator."""

from ._core import (
    ConfigError,
    DataError,
    Error,
    InvalidArgument,
    NumericalError,
    contraction_estimate,
    diagnose,
    fedavg_weights,
    kl_divergence_diagnostic,
    meta_agg,
    parse_config,
    phi_gradient,
    phi_objective,
    preset,
    preset_names,
    project_simplex,
    run,
    serialize_config,
    softmax_neg,
    weights_closed_form,
    weights_iterative,
)

__all__ = [
    "ConfigError",
    "DataError",
    "Error",
    "InvalidArgument",
    "NumericalError",
    "contraction_estimate",
    "diagnose",
    "fedavg_weights",
    "kl_divergence_diagnostic",
    "meta_agg",
    "parse_config",
    "phi_gradient",
    "phi_objective",
    "preset",
    "preset_names",
    "project_simplex",
    "run",
    "serialize_config",
    "softmax_neg",
    "weights_closed_form",
    "weights_iterative",
]
