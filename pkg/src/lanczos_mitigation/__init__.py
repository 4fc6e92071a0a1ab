"""Lanczos-inspired error mitigation for variational energies, with a noisy density-matrix simulator."""

from .krylov import (MitigatedEstimate, MomentSet, constrained_select, cube_root, delta_h_profile,
                     condition_eq3, fixed_ratio_estimate, lanczos_general, lanczos_m2, measure_moments, overlap_condition,
                     spectral_weights, wls_average)
from .models import build_appendix_b_example, build_two_qubit_example, build_tetrahedron, ground_energy, load_pauli_file
from .pauli import PauliSum, PauliTerm, count_terms_report, multiply_sums, power
from .simulator import Circuit, DensityMatrix, NoiseModel, ShotEstimate, run_circuit, sampled_expectation
from .vqe import AnsatzSpec, VqeConfig, build_ansatz, run_vqe
from .zne import ZneConfig, extrapolate, fold_and_measure

__version__ = "0.1.0"
