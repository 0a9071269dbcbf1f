"""Multi-cavity optomechanical transfer of W states to a single optical photon."""
from .analysis import (SweepResult, WState, generation_fidelity, overlap_fidelity, random_w_states, roundtrip,
                       sweep_damping, sweep_time, transmission_fidelity)
from .control import CrabConfig, OptimizationReport, optimize_crab, trivial_schedule
from .dynamics import (PulseShape, TimeGrid, Trajectory, analytic_time_independent, evolve_emission,
                       evolve_injection, evolve_reduced, time_reverse)
from .estimator import CrabTransfer, SequentialTransfer
from .model import (DegenerateCouplingError, SystemParams, conditional_hamiltonian, dark_basis,
                    interaction_hamiltonian, m_matrix, partial_norms, phi0_vector, u_matrix, v_matrix)
from .schedule import ConstantRatioSchedule, CrabSchedule, HarmonicProfile, PiecewiseSchedule, Segment

__version__ = "0.1.0"

__all__ = [
    "ConstantRatioSchedule", "CrabConfig", "CrabSchedule", "CrabTransfer", "DegenerateCouplingError",
    "HarmonicProfile", "OptimizationReport", "PiecewiseSchedule", "PulseShape", "Segment", "SequentialTransfer",
    "SweepResult", "SystemParams", "TimeGrid", "Trajectory", "WState", "analytic_time_independent",
    "conditional_hamiltonian", "dark_basis", "evolve_emission", "evolve_injection", "evolve_reduced",
    "generation_fidelity", "interaction_hamiltonian", "m_matrix", "optimize_crab", "overlap_fidelity",
    "partial_norms", "phi0_vector", "random_w_states", "roundtrip", "sweep_damping", "sweep_time",
    "time_reverse", "transmission_fidelity", "trivial_schedule", "u_matrix", "v_matrix",
]
