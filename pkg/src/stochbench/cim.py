"""Chaotic-amplitude-control CIM simulated by explicit Euler-Maruyama steps.

Amplitudes follow ``dx/dt = (R-1)x - mu x^3 + beta e * (coupling field)`` and
error variables ``de/dt = -xi (x^2 - a) e`` with ``xi = max(0, gamma (t - t_c))``
and target ``a = alpha + rho tanh(delta dH)``, where ``dH`` is the current
sign-projected energy minus the best energy found so far in the shot.

The coupling field is ``-sum_j J_ij x_j`` so the flow descends ``s'Js``.
"""
from __future__ import annotations

import dataclasses
import warnings
from dataclasses import dataclass

import numpy as np

from . import _backend
from .model import IsingInstance, ParameterPoint, SampleRecord, SampleSet, energy, sign_spins
from .seeding import derived_int, substream

SOLVER_ID = "cim-cac"
PARAM_NAMES = ("alpha", "beta", "gamma", "pump")
INTEGER_PARAMS = ()
MAX_RESTARTS = 3
X_LIMIT = 10.0


class DivergenceError(RuntimeError):
    pass


@dataclass(frozen=True)
class CimParams:
    alpha: float = 0.25
    beta: float = 0.002
    gamma: float = 0.08
    pump: float = -10.0

    def __post_init__(self):
        if not all(np.isfinite([self.alpha, self.beta, self.gamma, self.pump])):
            raise ValueError("CIM parameters must be finite")
        if self.gamma < 0:
            warnings.warn(f"gamma={self.gamma} < 0 keeps the error variables frozen", stacklevel=3)

    @classmethod
    def from_point(cls, point: ParameterPoint) -> "CimParams":
        return cls(**{k: point[k] for k in PARAM_NAMES})

    def to_point(self) -> ParameterPoint:
        return ParameterPoint.make(SOLVER_ID, dataclasses.asdict(self))


@dataclass(frozen=True)
class CimFixedParams:
    dt: float = 0.00625
    mu: float = 0.5
    rho: float = 5.0
    delta: float = 10.0
    noise: float = 0.5
    steps: int = 5000
    t_c: float = 0.0

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError(f"dt must be positive, got {self.dt}")
        if self.steps < 1:
            raise ValueError(f"steps must be >= 1, got {self.steps}")
        if self.noise < 0:
            raise ValueError(f"noise must be nonnegative, got {self.noise}")


@dataclass
class CimState:
    x: np.ndarray
    e: np.ndarray
    t: float
    best_energy: float
    best_config: np.ndarray

    @classmethod
    def start(cls, instance: IsingInstance, x: np.ndarray, e: np.ndarray | None = None, t: float = 0.0):
        x = np.array(x, dtype=np.float64)
        e = np.ones(instance.n) if e is None else np.array(e, dtype=np.float64)
        if x.shape != (instance.n,) or e.shape != (instance.n,):
            raise ValueError(f"state vectors must have length {instance.n}")
        spins = sign_spins(x)
        return cls(x, e, float(t), energy(instance, spins), spins)


def modulate_target(alpha: float, rho: float, delta: float, dH: float) -> float:
    return alpha + rho * np.tanh(delta * dH)


def _integrate(state: CimState, instance: IsingInstance, params: CimParams, fixed: CimFixedParams,
               gauss: np.ndarray, kernels) -> tuple[int, int, bool]:
    best_energy, best_step, done, t, diverged = kernels.cac_run(
        instance.indptr, instance.indices, instance.data, state.x, state.e,
        np.ascontiguousarray(gauss, dtype=np.float64), state.t, state.best_energy, state.best_config,
        params.alpha, -params.beta, params.gamma, params.pump, fixed.dt, fixed.mu,
        fixed.rho, fixed.delta, fixed.noise, fixed.t_c, X_LIMIT,
    )
    state.best_energy = float(best_energy)
    state.t = float(t)
    return int(best_step), int(done), bool(diverged)


def cac_step(state: CimState, instance: IsingInstance, params: CimParams, fixed: CimFixedParams,
             rng: np.random.Generator, kernels=None) -> CimState:
    """Advance a copy of ``state`` by one step of size ``fixed.dt``."""
    if state.x.shape != (instance.n,):
        raise ValueError(f"state has {state.x.shape[0]} amplitudes, instance has {instance.n} spins")
    new = CimState(state.x.copy(), state.e.copy(), state.t, state.best_energy, state.best_config.copy())
    gauss = rng.standard_normal((1, instance.n))
    _, _, diverged = _integrate(new, instance, params, fixed, gauss, kernels or _backend.kernels)
    if diverged:
        raise DivergenceError(f"amplitudes diverged at t={new.t:g}")
    return new


def cim_shot(instance: IsingInstance, params: CimParams, fixed: CimFixedParams,
             rng: np.random.Generator, kernels=None) -> tuple[CimState, int, bool]:
    """Integrate one shot from a small random start; returns ``(state, best_step, diverged)``."""
    x0 = 0.1 * fixed.noise * rng.uniform(-1.0, 1.0, instance.n)
    state = CimState.start(instance, x0)
    gauss = rng.standard_normal((fixed.steps, instance.n))
    best_step, _, diverged = _integrate(state, instance, params, fixed, gauss, kernels or _backend.kernels)
    return state, best_step, diverged


def run_cim(instance: IsingInstance, params: CimParams, fixed: CimFixedParams, shots: int, seed: int,
            kernels=None) -> SampleSet:
    """Run ``shots`` shots; a diverged shot restarts on a fresh substream up to three times."""
    if shots < 1:
        raise ValueError("shots must be >= 1")
    records = []
    for shot in range(shots):
        for attempt in range(MAX_RESTARTS + 1):
            rng = substream(seed, "cim-shot", shot, attempt)
            state, best_step, diverged = cim_shot(instance, params, fixed, rng, kernels)
            if not diverged:
                break
        records.append(
            SampleRecord(
                energy=energy(instance, state.best_config),
                resource_cost=float(fixed.steps),
                shot_seed=derived_int(seed, "cim-shot", shot, attempt),
                config=state.best_config.copy(),
                best_step=best_step,
                diverged=diverged,
            )
        )
    return SampleSet(instance.instance_id, SOLVER_ID, params.to_point(), records)
