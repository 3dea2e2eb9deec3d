"""Concentration vectors, weight sequences and the functionals on them.

``psi[k]`` holds the concentration of clusters of size ``k + 1``.  Every
functional sums in ascending size order with ``math.fsum`` so results are
correctly rounded and identical across runs and platforms.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Optional, Sequence, Union

import numpy as np

from .errors import ConfigError, RangeError, ValidationError


@dataclass(frozen=True, eq=False)
class ClusterDistribution:
    """Finite non-negative concentration vector ``(psi_1, ..., psi_n)``."""

    psi: np.ndarray

    def __post_init__(self):
        arr = np.array(self.psi, dtype=np.float64).reshape(-1)
        if arr.size < 1:
            raise ValidationError("a distribution needs at least one size class")
        if not np.all(np.isfinite(arr)):
            raise ValidationError("concentrations must be finite")
        arr.flags.writeable = False
        object.__setattr__(self, "psi", arr)

    @property
    def n(self) -> int:
        return self.psi.shape[0]

    @cached_property
    def mass(self) -> float:
        return norm(self)

    def __len__(self):
        return self.n

    def __eq__(self, other):
        if not isinstance(other, ClusterDistribution):
            return NotImplemented
        return np.array_equal(self.psi, other.psi)

    def __hash__(self):
        return hash(self.psi.tobytes())


StateLike = Union[ClusterDistribution, Sequence[float], np.ndarray]


def _arr(state: StateLike) -> np.ndarray:
    if isinstance(state, ClusterDistribution):
        return state.psi
    return np.asarray(state, dtype=np.float64).reshape(-1)


def _sizes(n: int) -> np.ndarray:
    return np.arange(1, n + 1, dtype=np.float64)


# -- weight sequences ------------------------------------------------------

@dataclass(frozen=True)
class WeightSequence:
    """A weight rule ``g: size -> real`` used by moment functionals.

    ``rule`` is ``power`` (g_i = i**p), ``capped`` (g_i = min(i, A)),
    ``unit`` (g_i = 1) or ``custom`` (explicit table ``g_1..g_m``).
    """

    rule: str
    p: float = 1.0
    cap: int = 0
    table: tuple = field(default=(), repr=False)

    def __post_init__(self):
        if self.rule not in ("power", "capped", "unit", "custom"):
            raise ValidationError(f"unknown weight rule {self.rule!r}")
        if self.rule == "capped" and self.cap < 1:
            raise ValidationError(f"cap must be >= 1, got {self.cap}")

    @classmethod
    def power(cls, p: float) -> "WeightSequence":
        return cls("power", p=float(p))

    @classmethod
    def capped(cls, cap: int) -> "WeightSequence":
        return cls("capped", cap=int(cap))

    @classmethod
    def unit(cls) -> "WeightSequence":
        return cls("unit")

    @classmethod
    def custom(cls, values) -> "WeightSequence":
        return cls("custom", table=tuple(float(v) for v in values))

    def values(self, n: int) -> np.ndarray:
        """``g_1..g_n`` as a float array."""
        s = _sizes(n)
        if self.rule == "power":
            return s ** self.p
        if self.rule == "capped":
            return np.minimum(s, float(self.cap))
        if self.rule == "unit":
            return np.ones(n)
        if n > len(self.table):
            raise RangeError(f"custom weights defined up to {len(self.table)}, need {n}")
        return np.asarray(self.table[:n], dtype=np.float64)

    def __call__(self, i: int) -> float:
        return float(self.values(i)[i - 1])


# -- functionals -----------------------------------------------------------

def norm(state: StateLike) -> float:
    """Mass ``sum_i i*psi_i``."""
    psi = _arr(state)
    return math.fsum(_sizes(psi.size) * psi)


def moment(state: StateLike, g: WeightSequence) -> float:
    """Weighted moment ``sum_i g_i*psi_i``; power(1) reproduces :func:`norm` exactly."""
    psi = _arr(state)
    return math.fsum(g.values(psi.size) * psi)


def tail_nu(state: StateLike, m: int) -> float:
    """Mass carried by clusters of size ``>= m``."""
    psi = _arr(state)
    n = psi.size
    if not 1 <= m <= n:
        raise RangeError(f"tail index m={m} outside 1..{n}")
    return math.fsum(_sizes(n)[m - 1:] * psi[m - 1:])


def tail_kappa(state: StateLike, m: int) -> float:
    """Capped tail ``sum_{m<=i<=2m} i*psi_i + 2m*sum_{i>2m} psi_i``; needs ``2m < n``."""
    psi = _arr(state)
    n = psi.size
    if m < 1 or 2 * m >= n:
        raise RangeError(f"tail_kappa needs 1 <= m and 2m < n, got m={m}, n={n}")
    w = np.minimum(_sizes(n), 2.0 * m)
    return math.fsum(w[m - 1:] * psi[m - 1:])


def xi(state: StateLike, m: int, t: float, initial_mass: float) -> float:
    """Discounted tail ``e^-t * [mu_1 - sum_{i<m} i psi_i + (2m+2) mu_1(0)^2]``."""
    if m < 1:
        raise RangeError(f"m must be >= 1, got {m}")
    if t < 0:
        raise ValidationError(f"t must be >= 0, got {t}")
    psi = _arr(state)
    s = _sizes(psi.size) * psi
    head = s[: m - 1]
    inner = math.fsum(np.concatenate([s, -head, [(2 * m + 2) * initial_mass ** 2]]))
    return math.exp(-t) * inner


def l1_distance(a: StateLike, b: StateLike) -> float:
    x, y = _arr(a), _arr(b)
    if x.size != y.size:
        raise RangeError(f"size mismatch: {x.size} vs {y.size}")
    return math.fsum(np.abs(x - y))


# -- initial data ----------------------------------------------------------

@dataclass(frozen=True)
class InitialCondition:
    """Descriptor for initial data; :meth:`build` materialises it at size ``n``.

    ``monodisperse``: all mass in monomers.  ``exponential``: psi_i
    proportional to exp(-i/mean), rescaled numerically to the requested mass.
    ``custom``: explicit vector, zero-padded or cut to ``n``.
    """

    kind: str
    mass: float = 1.0
    mean: float = 1.0
    values: tuple = field(default=(), repr=False)

    def __post_init__(self):
        if self.kind not in ("monodisperse", "exponential", "custom"):
            raise ValidationError(f"unknown initial kind {self.kind!r}")
        if self.kind != "custom" and not self.mass > 0:
            raise ValidationError(f"mass must be > 0, got {self.mass}")
        if self.kind == "exponential" and not self.mean > 0:
            raise ValidationError(f"mean must be > 0, got {self.mean}")
        if self.kind == "custom":
            vals = tuple(float(v) for v in self.values)
            if not vals:
                raise ValidationError("custom initial data is empty")
            if any(v < 0 or not math.isfinite(v) for v in vals):
                raise ValidationError("custom initial data must be finite and non-negative")
            object.__setattr__(self, "values", vals)

    @classmethod
    def monodisperse(cls, mass=1.0):
        return cls("monodisperse", mass=float(mass))

    @classmethod
    def exponential(cls, mean, mass=1.0):
        return cls("exponential", mass=float(mass), mean=float(mean))

    @classmethod
    def custom(cls, values):
        return cls("custom", values=tuple(values))

    def build(self, n: Optional[int] = None) -> ClusterDistribution:
        if n is None:
            if self.kind != "custom":
                raise ValidationError("n is required for non-custom initial data")
            n = len(self.values)
        if n < 1:
            raise RangeError(f"n must be >= 1, got {n}")
        psi = np.zeros(n)
        if self.kind == "monodisperse":
            psi[0] = self.mass
        elif self.kind == "exponential":
            psi = np.exp(-_sizes(n) / self.mean)
            psi *= self.mass / norm(psi)
        else:
            k = min(n, len(self.values))
            psi[:k] = self.values[:k]
        return ClusterDistribution(psi)

    def to_dict(self) -> dict:
        if self.kind == "monodisperse":
            return {"kind": "monodisperse", "mass": self.mass}
        if self.kind == "exponential":
            return {"kind": "exponential", "mean": self.mean, "mass": self.mass}
        return {"kind": "custom", "values": list(self.values)}

    @classmethod
    def from_dict(cls, d: dict) -> "InitialCondition":
        if not isinstance(d, dict):
            raise ConfigError("initial: expected an object")
        kind = d.get("kind")
        allowed = {
            "monodisperse": {"kind", "mass", "n"},
            "exponential": {"kind", "mass", "mean", "n"},
            "custom": {"kind", "values", "n"},
        }.get(kind)
        if allowed is None:
            raise ConfigError(f"initial.kind: expected monodisperse|exponential|custom, got {kind!r}")
        unknown = set(d) - allowed
        if unknown:
            raise ConfigError(f"initial: unknown field(s) {sorted(unknown)}")
        try:
            if kind == "monodisperse":
                return cls.monodisperse(d.get("mass", 1.0))
            if kind == "exponential":
                if "mean" not in d:
                    raise ConfigError("initial.mean: required for exponential")
                return cls.exponential(d["mean"], d.get("mass", 1.0))
            return cls.custom(d.get("values", ()))
        except (TypeError, ValidationError) as exc:
            raise ConfigError(f"initial: {exc}") from exc


def make_initial(kind: InitialCondition, n: int) -> ClusterDistribution:
    return kind.build(n)


# -- trajectories ----------------------------------------------------------

@dataclass(frozen=True)
class SampleDiagnostics:
    mass: float
    mu0: float
    step_count: int
    rejected_steps: int
    mass_drift: float
    min_component: float

    def to_dict(self) -> dict:
        return {
            "mass": self.mass,
            "mu0": self.mu0,
            "step_count": self.step_count,
            "rejected_steps": self.rejected_steps,
            "mass_drift": self.mass_drift,
            "min_component": self.min_component,
        }


@dataclass
class Trajectory:
    """States sampled at increasing times, with per-sample diagnostics."""

    times: np.ndarray
    states: list[ClusterDistribution]
    diagnostics: list[SampleDiagnostics]

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=np.float64)
        if len(self.times) != len(self.states) or len(self.states) != len(self.diagnostics):
            raise ValidationError("times, states and diagnostics must align")
        if self.times.size and self.times[0] != 0.0:
            raise ValidationError("trajectory must start at t = 0")
        if np.any(np.diff(self.times) <= 0):
            raise ValidationError("trajectory times must be strictly increasing")
        if len({s.n for s in self.states}) > 1:
            raise ValidationError("all states must share the same n")

    @property
    def n(self) -> int:
        return self.states[0].n

    def matrix(self) -> np.ndarray:
        return np.vstack([s.psi for s in self.states])

    def __len__(self):
        return len(self.states)

    def max_mass_drift(self) -> float:
        return max(d.mass_drift for d in self.diagnostics)
