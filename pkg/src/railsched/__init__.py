"""Multi-rate rail vehicle simulation on an optimized cyclic multicore schedule."""

__version__ = "0.1.0"
