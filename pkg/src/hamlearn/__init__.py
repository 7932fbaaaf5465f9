"""hamlearn: structure-preserving Hamiltonian learning.

Learn a polynomial Hamiltonian from sampled trajectories by least squares
on gradients, then simulate and evaluate the reconstructed dynamics.
"""

__version__ = "0.1.0"
