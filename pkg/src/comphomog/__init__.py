"""Homogenization of strongly competing species with oscillating diffusivity.

Finite element solvers for the eps-problem, periodic cell problems for
effective tensors, an enthalpy solver for the two-phase limit and the
diagnostics and scenario tooling around them.
"""
from .errors import ConfigError, InvalidArgument, NumericalError, ReduceTimestepError

__version__ = "0.1.0"

__all__ = ["ConfigError", "InvalidArgument", "NumericalError", "ReduceTimestepError"]
