"""Wishart planted-ensemble instances and the line-oriented instance file format."""
from __future__ import annotations

import math
import os
import tempfile
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .model import InstanceFormatError, IsingError, IsingInstance, spins_from_str, spins_to_str
from .seeding import substream


class InvalidSpecError(ValueError):
    pass


def round_half_away(x: float) -> int:
    return int(math.copysign(math.floor(abs(x) + 0.5), x))


@dataclass(frozen=True)
class WishartSpec:
    n: int
    alpha: float
    seed: int
    count: int = 1

    @property
    def rows(self) -> int:
        return round_half_away(self.alpha * self.n)

    def validate(self) -> None:
        if self.n < 2:
            raise InvalidSpecError(f"n must be >= 2, got {self.n}")
        if not 0 < self.alpha <= 1:
            raise InvalidSpecError(f"alpha must lie in (0, 1], got {self.alpha}")
        if self.rows < 1:
            raise InvalidSpecError(f"round(alpha*n) = {self.rows} rows; need at least one")
        if self.count < 1:
            raise InvalidSpecError(f"count must be >= 1, got {self.count}")

    def instance_id(self, k: int) -> str:
        return f"wishart_n{self.n}_a{self.alpha:g}_s{self.seed}_{k:03d}"


def wishart_factor(spec: WishartSpec, k: int) -> tuple[np.ndarray, np.ndarray]:
    """Return ``(W, planted)`` for instance ``k`` with ``W @ planted == 0``.

    The planted state is the all-ones vector under a random gauge mask; each
    Gaussian row of ``W`` is projected orthogonal to it.
    """
    spec.validate()
    rng = substream(spec.seed, "wishart", k)
    planted = rng.choice(np.array([-1, 1], dtype=np.int8), size=spec.n)
    W = rng.standard_normal((spec.rows, spec.n))
    s = planted.astype(np.float64)
    W -= np.outer(W @ s / spec.n, s)
    return W, planted


def wishart_instance(spec: WishartSpec, k: int) -> IsingInstance:
    W, planted = wishart_factor(spec, k)
    J = W.T @ W / spec.n
    np.fill_diagonal(J, 0.0)
    J = 0.5 * (J + J.T)
    meta = {
        "id": spec.instance_id(k),
        "generator": "wishart",
        "wishart_alpha": repr(float(spec.alpha)),
        "seed": str(spec.seed),
        "index": str(k),
    }
    return IsingInstance.from_dense(J, planted_state=planted, meta=meta)


def generate_wishart(spec: WishartSpec) -> list[IsingInstance]:
    spec.validate()
    return [wishart_instance(spec, k) for k in range(spec.count)]


def format_instance(instance: IsingInstance) -> str:
    lines = [f"ising {instance.n}"]
    for key, value in sorted(instance.meta.items()):
        if any(c.isspace() for c in key) or "\n" in value:
            raise IsingError(f"meta entry {key!r} cannot be written")
        lines.append(f"# meta {key} {value}")
    if instance.planted_state is not None:
        lines.append(f"planted {spins_to_str(instance.planted_state)} {instance.ground_energy!r}")
    for i, j, value in instance.upper_couplings():
        lines.append(f"{i} {j} {value!r}")
    return "\n".join(lines) + "\n"


def atomic_write_text(path: str | os.PathLike, text: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_instance(instance: IsingInstance, path: str | os.PathLike) -> None:
    atomic_write_text(path, format_instance(instance))


def parse_instance(text: str) -> IsingInstance:
    n = None
    meta: dict[str, str] = {}
    planted = None
    ground = None
    planted_line = None
    couplings: dict[tuple[int, int], float] = {}
    seen_at: dict[tuple[int, int], int] = {}

    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            parts = line[1:].split(None, 2)
            if parts and parts[0] == "meta":
                if len(parts) < 2:
                    raise InstanceFormatError("meta line needs a key", lineno)
                meta[parts[1]] = parts[2] if len(parts) > 2 else ""
            continue
        fields = line.split()
        if n is None:
            if len(fields) != 2 or fields[0] != "ising":
                raise InstanceFormatError("expected header 'ising <n>'", lineno)
            try:
                n = int(fields[1])
            except ValueError:
                raise InstanceFormatError(f"bad spin count {fields[1]!r}", lineno) from None
            if n < 2:
                raise InstanceFormatError(f"spin count must be >= 2, got {n}", lineno)
            continue
        if fields[0] == "planted":
            if planted is not None:
                raise InstanceFormatError("duplicate planted line", lineno)
            if couplings:
                raise InstanceFormatError("planted line must precede couplings", lineno)
            if len(fields) != 3:
                raise InstanceFormatError("expected 'planted <spins> <ground_energy>'", lineno)
            try:
                planted = spins_from_str(fields[1])
                ground = float(fields[2])
            except ValueError as exc:
                raise InstanceFormatError(str(exc), lineno) from None
            if planted.shape[0] != n:
                raise InstanceFormatError(f"planted state has {planted.shape[0]} spins, expected {n}", lineno)
            planted_line = lineno
            continue
        if len(fields) != 3:
            raise InstanceFormatError("expected 'i j J_ij'", lineno)
        try:
            i, j, value = int(fields[0]), int(fields[1]), float(fields[2])
        except ValueError:
            raise InstanceFormatError(f"cannot parse coupling {line!r}", lineno) from None
        if not (0 <= i < n and 0 <= j < n):
            raise InstanceFormatError(f"index out of range for n={n}", lineno)
        if i == j:
            raise InstanceFormatError(f"diagonal coupling J_{i}{i} is not allowed", lineno)
        if not math.isfinite(value):
            raise InstanceFormatError("non-finite coupling", lineno)
        key = (min(i, j), max(i, j))
        if key in couplings:
            raise InstanceFormatError(f"duplicate coupling {key} (first on line {seen_at[key]})", lineno)
        couplings[key] = value
        seen_at[key] = lineno

    if n is None:
        raise InstanceFormatError("missing 'ising <n>' header", 1)
    try:
        return IsingInstance.from_couplings(n, couplings, planted_state=planted, ground_energy=ground, meta=meta)
    except IsingError as exc:
        raise InstanceFormatError(str(exc), planted_line) from None


def read_instance(path: str | os.PathLike) -> IsingInstance:
    return parse_instance(Path(path).read_text())
