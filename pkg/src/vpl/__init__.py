"""Steady vortex patch pairs in the unit disk by constrained energy maximization."""

__version__ = "0.1.0"

from .disk_grid import Ball, DiskGrid, build_grid, integrate, symmetrize_even_odd
from .energy_solver import SolveResult, SolverConfig, bathtub_select, energy, solve, threshold_profile
from .green_kernel import apply_green, green, h_regular, robin, velocity_at
from .kirchhoff_routh import KrCritPoint, KrProblem, crit_system, kr_energy, kr_minimize, radial_objective
from .patch_class import PatchConstraints, PatchField, initial_patch, make_feasible, validate

__all__ = [
    "Ball", "DiskGrid", "build_grid", "integrate", "symmetrize_even_odd",
    "green", "h_regular", "robin", "apply_green", "velocity_at",
    "KrProblem", "KrCritPoint", "kr_energy", "radial_objective", "crit_system", "kr_minimize",
    "PatchConstraints", "PatchField", "initial_patch", "make_feasible", "validate",
    "SolverConfig", "SolveResult", "energy", "bathtub_select", "solve", "threshold_profile",
]
