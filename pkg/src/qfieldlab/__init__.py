"""Classical lattice fields and bosonic Fock space, linked by coherent-state P and Q maps."""

__version__ = "0.1.0"
