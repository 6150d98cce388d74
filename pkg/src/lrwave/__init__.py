"""Numerics for long-range Hamilton flows, momentum-space Hamilton-Jacobi phases and wavefront probes."""
__version__ = "0.1.0"
