"""Zero-field Ising problems, energies and solver sample containers.

The objective is ``E(s) = s' J s`` summed over the full symmetric matrix, so a
single pair contributes ``2 J_ij s_i s_j``.  Solvers minimize it.
"""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from functools import cached_property
from typing import Mapping, Sequence

import numpy as np


class IsingError(ValueError):
    """Invalid Ising instance or configuration."""


class DimensionError(IsingError):
    pass


class InstanceFormatError(IsingError):
    """Malformed instance file; carries the offending line number."""

    def __init__(self, message: str, lineno: int | None = None):
        self.lineno = lineno
        if lineno is not None:
            message = f"line {lineno}: {message}"
        super().__init__(message)


def as_spins(config: Sequence[int] | np.ndarray, n: int | None = None) -> np.ndarray:
    """Validate a spin configuration and return it as an int8 array."""
    spins = np.asarray(config)
    if spins.ndim != 1:
        raise DimensionError(f"spin configuration must be 1-d, got shape {spins.shape}")
    if n is not None and spins.shape[0] != n:
        raise DimensionError(f"configuration has {spins.shape[0]} spins, instance has {n}")
    if not np.all((spins == 1) | (spins == -1)):
        raise IsingError("spins must be +1 or -1")
    return spins.astype(np.int8)


def sign_spins(x: np.ndarray) -> np.ndarray:
    """Project continuous amplitudes onto spins; zero maps to +1."""
    return np.where(np.asarray(x) < 0, -1, 1).astype(np.int8)


@dataclass(frozen=True, eq=False)
class IsingInstance:
    """Symmetric, zero-diagonal couplings stored as per-spin adjacency (CSR).

    ``indptr``/``indices``/``data`` hold both triangle halves, so row ``i``
    lists every neighbour of spin ``i``.  Use :meth:`from_dense` or
    :meth:`from_couplings` rather than the raw constructor.
    """

    n: int
    indptr: np.ndarray
    indices: np.ndarray
    data: np.ndarray
    planted_state: np.ndarray | None = None
    ground_energy: float | None = None
    meta: Mapping[str, str] = field(default_factory=dict)

    def __post_init__(self):
        if self.n < 2:
            raise IsingError(f"need at least 2 spins, got n={self.n}")
        for arr in (self.indptr, self.indices, self.data):
            arr.setflags(write=False)
        if self.planted_state is not None:
            planted = as_spins(self.planted_state, self.n)
            planted.setflags(write=False)
            object.__setattr__(self, "planted_state", planted)
            expected = energy(self, planted)
            if self.ground_energy is None:
                object.__setattr__(self, "ground_energy", expected)
            elif self.ground_energy != expected:
                raise IsingError(
                    f"ground_energy {self.ground_energy!r} != energy(planted_state) {expected!r}"
                )
        object.__setattr__(self, "meta", dict(self.meta))

    @classmethod
    def from_couplings(cls, n: int, couplings: Mapping[tuple[int, int], float], **kwargs) -> "IsingInstance":
        """Build from upper-triangle ``{(i, j): J_ij}`` with ``i < j``."""
        dense = np.zeros((n, n))
        for (i, j), value in couplings.items():
            if not (0 <= i < n and 0 <= j < n):
                raise IsingError(f"coupling ({i}, {j}) out of range for n={n}")
            if i == j:
                raise IsingError(f"diagonal coupling J_{i}{i} must be zero")
            dense[i, j] = dense[j, i] = value
        return cls.from_dense(dense, **kwargs)

    @classmethod
    def from_dense(cls, J: np.ndarray, **kwargs) -> "IsingInstance":
        J = np.asarray(J, dtype=np.float64)
        if J.ndim != 2 or J.shape[0] != J.shape[1]:
            raise DimensionError(f"coupling matrix must be square, got {J.shape}")
        if np.any(np.diag(J) != 0):
            raise IsingError("coupling matrix must have a zero diagonal")
        if not np.array_equal(J, J.T):
            raise IsingError("coupling matrix must be symmetric")
        n = J.shape[0]
        rows, cols = np.nonzero(J)
        indptr = np.zeros(n + 1, dtype=np.int64)
        np.add.at(indptr, rows + 1, 1)
        indptr = np.cumsum(indptr)
        return cls(
            n=n,
            indptr=indptr,
            indices=cols.astype(np.int64),
            data=J[rows, cols].copy(),
            **kwargs,
        )

    @cached_property
    def dense(self) -> np.ndarray:
        J = np.zeros((self.n, self.n))
        for i in range(self.n):
            lo, hi = self.indptr[i], self.indptr[i + 1]
            J[i, self.indices[lo:hi]] = self.data[lo:hi]
        J.setflags(write=False)
        return J

    def upper_couplings(self) -> list[tuple[int, int, float]]:
        """Nonzero ``(i, j, J_ij)`` with ``i < j`` in row-major order."""
        out = []
        for i in range(self.n):
            for p in range(self.indptr[i], self.indptr[i + 1]):
                j = int(self.indices[p])
                if j > i:
                    out.append((i, j, float(self.data[p])))
        return out

    def degree(self, i: int) -> int:
        return int(self.indptr[i + 1] - self.indptr[i])

    @property
    def instance_id(self) -> str:
        return self.meta.get("id", "")

    def with_meta(self, **updates: str) -> "IsingInstance":
        return dataclasses.replace(self, meta={**self.meta, **updates})

    def same_as(self, other: "IsingInstance") -> bool:
        """Structural equality: couplings, planted state, ground energy and meta."""
        if self.n != other.n or self.meta != other.meta:
            return False
        if self.ground_energy != other.ground_energy:
            return False
        if (self.planted_state is None) != (other.planted_state is None):
            return False
        if self.planted_state is not None and not np.array_equal(self.planted_state, other.planted_state):
            return False
        return np.array_equal(self.dense, other.dense)


def energy(instance: IsingInstance, config) -> float:
    """Return ``s' J s`` with both (i, j) and (j, i) terms counted."""
    s = as_spins(config, instance.n).astype(np.float64)
    return float(s @ (instance.dense @ s))


def local_field(instance: IsingInstance, config, i: int) -> float:
    s = np.asarray(config)
    lo, hi = instance.indptr[i], instance.indptr[i + 1]
    h = 0.0
    for p in range(lo, hi):
        h += instance.data[p] * s[instance.indices[p]]
    return h


def delta_energy(instance: IsingInstance, config, flip_index: int) -> float:
    """Energy change from flipping one spin, in O(degree)."""
    s = np.asarray(config)
    if s.shape != (instance.n,):
        raise DimensionError(f"configuration has shape {s.shape}, instance has n={instance.n}")
    if not 0 <= flip_index < instance.n:
        raise IndexError(f"flip index {flip_index} out of range for n={instance.n}")
    return -4.0 * s[flip_index] * local_field(instance, s, flip_index)


def random_baseline(instance: IsingInstance) -> float:
    """Expected energy of a uniformly random configuration.

    Every off-diagonal term averages to zero, so this is exactly 0 for any
    zero-field instance.
    """
    return 0.0


@dataclass(frozen=True)
class ParameterPoint:
    """A named assignment of solver parameters, ordered as the solver declares them."""

    solver_id: str
    values: tuple[tuple[str, float], ...]

    @classmethod
    def make(cls, solver_id: str, values: Mapping[str, float]) -> "ParameterPoint":
        return cls(solver_id, tuple((k, float(v)) for k, v in values.items()))

    def as_dict(self) -> dict[str, float]:
        return dict(self.values)

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(k for k, _ in self.values)

    @property
    def vector(self) -> tuple[float, ...]:
        return tuple(v for _, v in self.values)

    def __getitem__(self, name: str) -> float:
        return self.as_dict()[name]

    @property
    def key(self) -> str:
        """Stable short hash used in file names and CSV columns."""
        import hashlib

        text = self.solver_id + "|" + ";".join(f"{k}={v!r}" for k, v in self.values)
        return hashlib.sha1(text.encode()).hexdigest()[:12]

    def label(self) -> str:
        return ",".join(f"{k}={v:g}" for k, v in self.values)


@dataclass(frozen=True)
class SampleRecord:
    energy: float
    resource_cost: float
    shot_seed: int
    config: np.ndarray | None = None
    best_step: int = 0
    diverged: bool = False

    def __post_init__(self):
        if not self.resource_cost > 0:
            raise ValueError(f"resource_cost must be positive, got {self.resource_cost}")


@dataclass
class SampleSet:
    instance_id: str
    solver_id: str
    params: ParameterPoint
    records: list[SampleRecord]

    def __post_init__(self):
        if not self.records:
            raise ValueError("a SampleSet needs at least one record")

    @property
    def total_resource(self) -> float:
        return float(sum(r.resource_cost for r in self.records))

    @property
    def energies(self) -> np.ndarray:
        return np.array([r.energy for r in self.records])

    @property
    def mean_cost(self) -> float:
        return self.total_resource / len(self.records)

    def to_json(self) -> dict:
        return {
            "instance_id": self.instance_id,
            "solver_id": self.solver_id,
            "params": [[k, v] for k, v in self.params.values],
            "total_resource": self.total_resource,
            "records": [
                {
                    "energy": r.energy,
                    "resource_cost": r.resource_cost,
                    "shot_seed": r.shot_seed,
                    "best_step": r.best_step,
                    "diverged": r.diverged,
                    "config": None if r.config is None else spins_to_str(r.config),
                }
                for r in self.records
            ],
        }

    @classmethod
    def from_json(cls, obj: dict) -> "SampleSet":
        params = ParameterPoint(obj["solver_id"], tuple((k, float(v)) for k, v in obj["params"]))
        records = [
            SampleRecord(
                energy=float(r["energy"]),
                resource_cost=float(r["resource_cost"]),
                shot_seed=int(r["shot_seed"]),
                best_step=int(r.get("best_step", 0)),
                diverged=bool(r.get("diverged", False)),
                config=None if r.get("config") is None else spins_from_str(r["config"]),
            )
            for r in obj["records"]
        ]
        return cls(obj["instance_id"], obj["solver_id"], params, records)


def spins_to_str(spins) -> str:
    return "".join("+" if s > 0 else "-" for s in np.asarray(spins))


def spins_from_str(text: str) -> np.ndarray:
    if not text or set(text) - {"+", "-"}:
        raise ValueError(f"not a +/- spin string: {text!r}")
    return np.array([1 if c == "+" else -1 for c in text], dtype=np.int8)
