"""Multi-source holographic display simulation with Fourier amplitude modulation."""

__version__ = "0.1.0"
