"""Numerical toolkit for uniform polynomial Wiener-Wintner averages on torus systems."""

from .averages import (AverageSeries, VdcReport, average_series, orbit_sequence, twisted_average,
                       two_scale_average, vdc_bound)
from .config import ConfigError, ExperimentConfig
from .phases import (DifferenceTable, PolynomialPhase, batched_linear_scan, eval_phase, phase_stream,
                     weyl_average)
from .scenarios import SCENARIOS, run_scenario
from .spectral import (QuasiEigenfunction, catalog_E1_counterexample, catalog_E2_counterexample,
                       orthogonality_report, verify_eigen_relation, verify_quasi_level)
from .systems import (AffinePhase, Counterexample, LesigneExtension, Power, Rotation, SystemState,
                      UnipotentSkew, ergodicity_probe, iterate_closed_form, orbit_stream, step)
from .torus import Character, GridDomain, Observable, cexp, frac, inner_product
from .uniformity import (CertificationBudgetError, SearchConfig, SupEstimate, block_decomposition_check,
                         sup_average, sup_average_weights, witness_phase_counterexample)

__version__ = "0.1.0"

__all__ = [
    "AffinePhase",
    "AverageSeries",
    "CertificationBudgetError",
    "Character",
    "ConfigError",
    "Counterexample",
    "DifferenceTable",
    "ExperimentConfig",
    "GridDomain",
    "LesigneExtension",
    "Observable",
    "PolynomialPhase",
    "Power",
    "QuasiEigenfunction",
    "Rotation",
    "SCENARIOS",
    "SearchConfig",
    "SupEstimate",
    "SystemState",
    "UnipotentSkew",
    "VdcReport",
    "average_series",
    "batched_linear_scan",
    "block_decomposition_check",
    "catalog_E1_counterexample",
    "catalog_E2_counterexample",
    "cexp",
    "ergodicity_probe",
    "eval_phase",
    "frac",
    "inner_product",
    "iterate_closed_form",
    "orbit_sequence",
    "orbit_stream",
    "orthogonality_report",
    "phase_stream",
    "run_scenario",
    "step",
    "sup_average",
    "sup_average_weights",
    "twisted_average",
    "two_scale_average",
    "vdc_bound",
    "verify_eigen_relation",
    "verify_quasi_level",
    "weyl_average",
    "witness_phase_counterexample",
]
