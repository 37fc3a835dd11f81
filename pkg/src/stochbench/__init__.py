"""Benchmarking toolkit for parameterized stochastic Ising solvers."""
from ._backend import BACKEND
from .model import IsingInstance, ParameterPoint, SampleRecord, SampleSet, delta_energy, energy, random_baseline

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "IsingInstance",
    "ParameterPoint",
    "SampleRecord",
    "SampleSet",
    "delta_energy",
    "energy",
    "random_baseline",
]
