"""minorlab: symbolic and Monte Carlo checks for small-noise minorization
of hypoelliptic diffusions over Hamiltonian sublevel sets."""

__version__ = "0.1.0"
