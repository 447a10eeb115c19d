"""Shadow-tomography toolkit for non-orthogonal eigensolver calculations.

Simulates randomized Clifford measurements on reference states, estimates
overlap and Hamiltonian matrix elements from the recorded snapshots, and
solves the resulting generalized eigenvalue problem, with optional gate
noise and zero-noise extrapolation.
"""

__version__ = "0.1.0"
