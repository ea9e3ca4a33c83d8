"""Energy derivatives of qubit Hamiltonians from simulated quantum measurements."""
__version__ = "0.1.0"
