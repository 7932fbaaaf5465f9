"""Pydantic schemas for phase-space data, bases, models and experiments."""

from .basis import BasisDescriptor, DomainBox, MultiIndex, StabilityDiagnostic
from .data import BurstPlan, BurstSet, DataPairSet, DenoiseConfig, NoiseSpec, PairProvenance
from .experiment import (
    ComparisonReport,
    ConvergenceStudy,
    ExperimentConfig,
    ExperimentReport,
    FilterComparison,
)
from .model import DiagnosticsReport, ModelRecord, SolverReport
from .phase import HamiltonianSystem, IntegratorConfig, StateVector, Trajectory

__all__ = [
    "BasisDescriptor",
    "BurstPlan",
    "BurstSet",
    "ComparisonReport",
    "ConvergenceStudy",
    "DataPairSet",
    "DenoiseConfig",
    "DiagnosticsReport",
    "DomainBox",
    "ExperimentConfig",
    "ExperimentReport",
    "FilterComparison",
    "HamiltonianSystem",
    "IntegratorConfig",
    "ModelRecord",
    "MultiIndex",
    "NoiseSpec",
    "PairProvenance",
    "SolverReport",
    "StabilityDiagnostic",
    "StateVector",
    "Trajectory",
]
