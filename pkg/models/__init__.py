"""
Data models for the LLB Galerkin simulator
"""

from .domain_model import DomainSpec, EigenBasis
from .field_model import SpectralField, PhysicalField
from .params_model import ModelParams, NoiseBasis, DriftBreakdown
from .trajectory_model import TimeGrid, SeedInfo, WienerIncrements, EnergyLedger, Trajectory
from .report_model import (
    MomentEstimate, StructureFunction, UniquenessRun, UniquenessReport,
    ConvergenceRow, ConvergenceReport, InvariantMeasureReport, FellerReport, StrongOrderReport
)

__all__ = [
    'DomainSpec', 'EigenBasis', 'SpectralField', 'PhysicalField',
    'ModelParams', 'NoiseBasis', 'DriftBreakdown',
    'TimeGrid', 'SeedInfo', 'WienerIncrements', 'EnergyLedger', 'Trajectory',
    'MomentEstimate', 'StructureFunction', 'UniquenessRun', 'UniquenessReport',
    'ConvergenceRow', 'ConvergenceReport', 'InvariantMeasureReport', 'FellerReport',
    'StrongOrderReport'
]
