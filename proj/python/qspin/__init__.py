"""Quenched spin systems on random geometric graphs."""

import json

from ._qspin import (
    ConvergenceError,
    InvalidParameter,
    NoCrossingError,
    Unsupported,
    artifact_version,
    beta_star_bound,
    check_outputs,
    cli,
    derive_seed,
    estimate_lambda_star,
    expected_a_bound,
    find_a,
    gilbert_edges,
    one_site_integral,
    q_star_bound,
    sample_poisson,
    sparsity,
)
from . import _qspin


def positivity_certificate(measure, a, max_exponent=8):
    return json.loads(_qspin.positivity_certificate(measure, a, max_exponent))


def run_experiment(config_text, output_dir, threads=0):
    """Run one experiment; returns the manifest as a dict."""
    return json.loads(_qspin.run_experiment(config_text, str(output_dir), threads))


__all__ = [
    "ConvergenceError",
    "InvalidParameter",
    "NoCrossingError",
    "Unsupported",
    "artifact_version",
    "beta_star_bound",
    "check_outputs",
    "cli",
    "derive_seed",
    "estimate_lambda_star",
    "expected_a_bound",
    "find_a",
    "gilbert_edges",
    "one_site_integral",
    "positivity_certificate",
    "q_star_bound",
    "run_experiment",
    "sample_poisson",
    "sparsity",
]
