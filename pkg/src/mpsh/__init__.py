"""Heisenberg-picture matrix product states: transfer channels, thermodynamic limits and mixing bounds."""

from mpsh.channel import KrausFamily, SuperOperator
from mpsh.mps import LocalObservable, MPSChain

__all__ = ["KrausFamily", "LocalObservable", "MPSChain", "SuperOperator"]
__version__ = "0.1.0"
