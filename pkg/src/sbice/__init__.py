"""Posterior inference over data-generating-process parameters via SMC-ABC
with a sliced-Wasserstein discrepancy, plus causal-estimator benchmarking
on the posterior- and prior-generated datasets."""

__version__ = "0.1.0"
