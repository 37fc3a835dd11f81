"""Parallel tempering with temperatures set from flip probabilities.

``p_cold`` fixes how likely the least likely flip is at the coldest replica;
``p_hot`` fixes how likely the most likely flip is at the hottest one.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from . import _backend
from .model import IsingInstance, ParameterPoint, SampleRecord, SampleSet, energy
from .seeding import derived_int, substream

SOLVER_ID = "pt"
PARAM_NAMES = ("n_replicas", "sweeps", "p_cold", "p_hot")
INTEGER_PARAMS = ("n_replicas", "sweeps")

# uniforms drawn per chunk of rounds
_CHUNK_DOUBLES = 1 << 18


class InvalidParameterError(ValueError):
    pass


class NoCouplingError(ValueError):
    pass


@dataclass(frozen=True)
class PtParams:
    n_replicas: int
    sweeps: int
    p_cold: float
    p_hot: float

    def __post_init__(self):
        if self.n_replicas < 1 or self.sweeps < 1:
            raise InvalidParameterError(
                f"n_replicas and sweeps must be >= 1, got {self.n_replicas}, {self.sweeps}"
            )
        if not 0 < self.p_cold or not 0 < self.p_hot < 1:
            raise InvalidParameterError(f"p_cold={self.p_cold}, p_hot={self.p_hot} out of range")

    @classmethod
    def from_point(cls, point: ParameterPoint) -> "PtParams":
        v = point.as_dict()
        return cls(int(round(v["n_replicas"])), int(round(v["sweeps"])), v["p_cold"], v["p_hot"])

    def to_point(self) -> ParameterPoint:
        return ParameterPoint.make(SOLVER_ID, {k: getattr(self, k) for k in PARAM_NAMES})

    @property
    def shot_cost(self) -> int:
        return self.n_replicas * self.sweeps


def gap_statistics(instance: IsingInstance) -> tuple[float, int, float]:
    """Return ``(dE_cold, N_min_gap, dE_hot)`` for the coupling matrix."""
    if not np.any(instance.data != 0):
        raise NoCouplingError("instance has no nonzero couplings")
    per_spin = []
    hot = 0.0
    for i in range(instance.n):
        row = np.abs(instance.data[instance.indptr[i]:instance.indptr[i + 1]])
        nz = row[row != 0]
        if nz.size:
            per_spin.append(2.0 * float(nz.min()))
        hot = max(hot, 2.0 * float(row.sum()))
    cold = min(per_spin)
    count = sum(1 for v in per_spin if v == cold)
    return cold, count, hot


def derive_temperatures(instance: IsingInstance, p_cold: float, p_hot: float) -> tuple[float, float]:
    """Invert ``p_cold = N exp(-dE_cold/T_min)`` and ``p_hot = exp(-dE_hot/T_max)``."""
    cold, count, hot = gap_statistics(instance)
    if not 0 < p_cold < count:
        raise InvalidParameterError(f"p_cold must lie in (0, {count}), got {p_cold}")
    if not 0 < p_hot < 1:
        raise InvalidParameterError(f"p_hot must lie in (0, 1), got {p_hot}")
    t_min = cold / math.log(count / p_cold)
    t_max = hot / math.log(1.0 / p_hot)
    if t_max < t_min:
        warnings.warn(f"T_max={t_max:g} < T_min={t_min:g}; swapping", stacklevel=2)
        t_min, t_max = t_max, t_min
    return t_min, t_max


def clamp_probabilities(instance: IsingInstance, p_cold: float, p_hot: float) -> tuple[float, float]:
    """Clip sampled probabilities into the open ranges the temperature formulas accept."""
    _, count, _ = gap_statistics(instance)
    eps = 1e-6
    return (
        min(max(p_cold, eps), count * (1 - eps)),
        min(max(p_hot, eps), 1 - eps),
    )


def temperature_ladder(t_min: float, t_max: float, n_replicas: int) -> np.ndarray:
    if not 0 < t_min <= t_max:
        raise InvalidParameterError(f"need 0 < T_min <= T_max, got {t_min}, {t_max}")
    if n_replicas < 1:
        raise InvalidParameterError("n_replicas must be >= 1")
    if n_replicas == 1:
        return np.array([t_min])
    k = np.arange(n_replicas)
    temps = t_min * (t_max / t_min) ** (k / (n_replicas - 1))
    temps[0], temps[-1] = t_min, t_max
    return temps


def metropolis_sweep(instance: IsingInstance, config: np.ndarray, T: float, rng: np.random.Generator,
                     current_energy: float | None = None, kernels=None) -> float:
    """Sequential Metropolis pass; mutates ``config`` and returns its energy."""
    if T <= 0:
        raise InvalidParameterError("temperature must be positive")
    k = kernels or _backend.kernels
    if current_energy is None:
        current_energy = energy(instance, config)
    return k.metropolis_sweep(instance.indptr, instance.indices, instance.data, config,
                              float(current_energy), float(T), rng.random(instance.n))


def swap_probability(t_a: float, e_a: float, t_b: float, e_b: float) -> float:
    x = (1.0 / t_a - 1.0 / t_b) * (e_a - e_b)
    return 1.0 if x >= 0 else math.exp(x)


def replica_swap(t_a: float, e_a: float, t_b: float, e_b: float, rng: np.random.Generator) -> bool:
    if t_a <= 0 or t_b <= 0:
        raise InvalidParameterError("temperatures must be positive")
    x = (1.0 / t_a - 1.0 / t_b) * (e_a - e_b)
    return x >= 0.0 or rng.random() < math.exp(x)


def pt_shot(instance: IsingInstance, params: PtParams, temps: np.ndarray, rng: np.random.Generator,
            kernels=None) -> tuple[float, np.ndarray, int]:
    """One PT shot: returns ``(best_energy, best_config, best_round)``."""
    k = kernels or _backend.kernels
    n, n_rep = instance.n, params.n_replicas
    spins = (2 * rng.integers(0, 2, size=(n_rep, n)) - 1).astype(np.int8)
    energies = np.array([energy(instance, s) for s in spins])
    slots = np.arange(n_rep, dtype=np.int64)
    best_row = int(np.argmin(energies))
    best_config = spins[best_row].copy()
    best_energy = float(energies[best_row])
    best_round = 0
    chunk = max(1, _CHUNK_DOUBLES // (n_rep * n))
    done = 0
    while done < params.sweeps:
        m = min(chunk, params.sweeps - done)
        flip_u = rng.random((m, n_rep, n))
        swap_u = rng.random((m, n_rep))
        best_energy, best_round = k.pt_rounds(
            instance.indptr, instance.indices, instance.data, spins, energies, slots, temps,
            flip_u, swap_u, done, best_config, best_energy, best_round,
        )
        done += m
    return best_energy, best_config, int(best_round)


def run_pt(instance: IsingInstance, params: PtParams, shots: int, seed: int, kernels=None,
           clamp: bool = False) -> SampleSet:
    """Run ``shots`` independent PT shots; shot ``k`` uses substream ``(seed, k)``.

    With ``clamp`` the flip probabilities are first clipped into their valid
    ranges for this instance (used for values drawn from search distributions).
    """
    if shots < 1:
        raise ValueError("shots must be >= 1")
    p_cold, p_hot = params.p_cold, params.p_hot
    if clamp:
        p_cold, p_hot = clamp_probabilities(instance, p_cold, p_hot)
    t_min, t_max = derive_temperatures(instance, p_cold, p_hot)
    temps = temperature_ladder(t_min, t_max, params.n_replicas)
    records = []
    for shot in range(shots):
        rng = substream(seed, "pt-shot", shot)
        _, config, best_round = pt_shot(instance, params, temps, rng, kernels)
        records.append(
            SampleRecord(
                energy=energy(instance, config),
                resource_cost=float(params.shot_cost),
                shot_seed=derived_int(seed, "pt-shot", shot),
                config=config,
                best_step=best_round,
            )
        )
    return SampleSet(instance.instance_id, SOLVER_ID, params.to_point(), records)
