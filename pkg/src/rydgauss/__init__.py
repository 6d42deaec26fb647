"""Gaussianity diagnostics for kinetically constrained Rydberg chains."""

from .hilbert import (ConstrainedBasis, MomentumSector, build_momentum_sector, enumerate_basis,
                      unconstrained_basis)
from .hamiltonians import (ModelSpec, SparseOperator, StateVector, build_effective_hamiltonian,
                           build_hamiltonian, build_longrange_hamiltonian, build_uv_hamiltonian,
                           observable, z2_state, z3_state)
from .solver import full_spectrum, ground_state, overlap_profile
from .dynamics import QuenchProtocol, QuenchResult, evolve, fidelity_compare, run_quench
from .gaussianity import (interaction_distance, interaction_distance_grid,
                          reduced_density_matrix, wick_violation)
from .spectral import TimeSeries, peak_match, power_spectrum

__all__ = [
    "ConstrainedBasis", "MomentumSector", "build_momentum_sector", "enumerate_basis",
    "unconstrained_basis", "ModelSpec", "SparseOperator", "StateVector",
    "build_effective_hamiltonian", "build_hamiltonian", "build_longrange_hamiltonian",
    "build_uv_hamiltonian", "observable", "z2_state", "z3_state", "full_spectrum",
    "ground_state", "overlap_profile", "QuenchProtocol", "QuenchResult", "evolve",
    "fidelity_compare", "run_quench", "interaction_distance", "interaction_distance_grid",
    "reduced_density_matrix", "wick_violation", "TimeSeries", "peak_match", "power_spectrum",
]
