"""Random walks among random conductances on lattices with boundary."""

__version__ = "0.1.0"
