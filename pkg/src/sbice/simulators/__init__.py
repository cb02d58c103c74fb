"""Dataset generators: the builtin parametric family, copula-coupled
generators, and the external-process bridge."""

from .base import (ExternalConfig, GeneratedDataset, SimulatorConfig, Theta,
                   parameter_names, simulate)
from .builtin import (BuiltinEntry, builtin_catalog, builtin_entry,
                      builtin_mc_ate, builtin_simulate,
                      builtin_simulate_full)
from .frugal import (CovariateMargin, FrugalConfig, FrugalEntry,
                     frugal_mc_ate, frugal_simulate)
from .frugal_presets import frugal_catalog, frugal_entry

__all__ = [
    "BuiltinEntry", "CovariateMargin", "ExternalConfig", "FrugalConfig",
    "FrugalEntry", "GeneratedDataset", "SimulatorConfig", "Theta",
    "builtin_catalog", "builtin_entry", "builtin_mc_ate", "builtin_simulate",
    "builtin_simulate_full",
    "frugal_catalog", "frugal_entry", "frugal_mc_ate", "frugal_simulate",
    "parameter_names", "simulate",
]
