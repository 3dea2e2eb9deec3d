"""Coagulation rate families ``V[i, j]`` and their growth-class bounds.

Indices are 1-based cluster sizes everywhere in this module.  ``matrix(n)``
returns the dense ``n x n`` table with ``V[i-1, j-1] = V_{i,j}``.
"""
from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional

import numpy as np

from .errors import ConfigError, RangeError, ValidationError
from .report import ExperimentReport

FAMILIES = ("constant", "sum", "alpha_sum", "min_power", "product", "tabulated")

_ASYMMETRY_WARN = 1e-9
_BOUND_SLACK = 1e-12


# -- growth classes ---------------------------------------------------------

@dataclass(frozen=True)
class GrowthClass:
    """A hypothesis class, i.e. a pointwise upper bound on ``V[i, j]``.

    ``kind`` is one of ``bounded`` (V <= scale), ``sum_linear``
    (V <= scale*(i+j)), ``alpha_sum`` (V <= i**a + j**a), ``min_power``
    (V <= scale*min(i, j)**eta) or ``unclassified`` (no bound).
    """

    kind: str
    scale: float = 1.0
    exponent: Optional[float] = None

    @classmethod
    def bounded(cls, c=1.0):
        return cls("bounded", float(c))

    @classmethod
    def sum_linear(cls, scale=1.0):
        return cls("sum_linear", float(scale))

    @classmethod
    def alpha_sum(cls, alpha):
        _check_alpha(alpha)
        return cls("alpha_sum", 1.0, float(alpha))

    @classmethod
    def min_power(cls, scale, eta):
        _check_eta(eta)
        return cls("min_power", float(scale), float(eta))

    @classmethod
    def unclassified(cls):
        return cls("unclassified")

    def bound(self, i, j):
        """Upper bound at (i, j); broadcasts over numpy arrays."""
        i = np.asarray(i, dtype=float)
        j = np.asarray(j, dtype=float)
        if self.kind == "bounded":
            return np.full(np.broadcast(i, j).shape, self.scale)
        if self.kind == "sum_linear":
            return self.scale * (i + j)
        if self.kind == "alpha_sum":
            return i ** self.exponent + j ** self.exponent
        if self.kind == "min_power":
            return self.scale * np.minimum(i, j) ** self.exponent
        return np.full(np.broadcast(i, j).shape, np.inf)

    def describe(self) -> str:
        if self.kind == "bounded":
            return f"V <= {self.scale:g}"
        if self.kind == "sum_linear":
            return f"V <= {self.scale:g}*(i+j)"
        if self.kind == "alpha_sum":
            return f"V <= i^{self.exponent:g} + j^{self.exponent:g}"
        if self.kind == "min_power":
            return f"V <= {self.scale:g}*min(i,j)^{self.exponent:g}"
        return "no growth bound"


def _check_alpha(alpha):
    if not 0.0 <= alpha <= 1.0:
        raise ValidationError(f"alpha must lie in [0, 1], got {alpha}")


def _check_eta(eta):
    if not 0.0 <= eta <= 2.0:
        raise ValidationError(f"eta must lie in [0, 2], got {eta}")


# -- separable decomposition -----------------------------------------------

Factor = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True)
class SeparableDecomposition:
    """``V[i, j] = sum_k a_k(i) * b_k(j)`` with vectorised factor rules."""

    terms: tuple[tuple[Factor, Factor], ...]

    def __len__(self):
        return len(self.terms)

    def evaluate(self, i, j):
        i = np.asarray(i, dtype=float)
        j = np.asarray(j, dtype=float)
        return sum(a(i) * b(j) for a, b in self.terms)

    def factors(self, n: int) -> tuple[np.ndarray, np.ndarray]:
        """Tabulate the factors on sizes 1..n as two C-contiguous (K, n) arrays."""
        sizes = np.arange(1, n + 1, dtype=float)
        a = np.empty((len(self.terms), n))
        b = np.empty((len(self.terms), n))
        for k, (fa, fb) in enumerate(self.terms):
            a[k] = np.broadcast_to(fa(sizes), (n,))
            b[k] = np.broadcast_to(fb(sizes), (n,))
        return a, b


def _const(c):
    return lambda x: np.full(np.shape(x), c, dtype=float)


def _linear(c):
    return lambda x: c * np.asarray(x, dtype=float)


def _power(p):
    return lambda x: np.asarray(x, dtype=float) ** p


# -- kernel -----------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class KernelSpec:
    """An immutable, symmetric, non-negative coagulation kernel.

    Build one through the family constructors (``KernelSpec.sum(1.0)``, ...)
    or :meth:`from_dict`.
    """

    family: str
    scale: float = 1.0
    alpha: Optional[float] = None
    eta: Optional[float] = None
    table: Optional[np.ndarray] = field(default=None, repr=False)
    _cache: dict = field(default_factory=dict, init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValidationError(f"unknown kernel family {self.family!r}")
        if self.family != "tabulated" and (
            not np.isfinite(self.scale) or self.scale < 0
        ):
            raise ValidationError(f"kernel scale must be finite and >= 0, got {self.scale}")
        if self.family == "alpha_sum":
            _check_alpha(self.alpha)
        if self.family == "min_power":
            _check_eta(self.eta)
        if self.family == "tabulated":
            object.__setattr__(self, "table", _symmetrize(self.table))

    # constructors
    @classmethod
    def constant(cls, c=1.0):
        return cls("constant", scale=float(c))

    @classmethod
    def sum(cls, scale=1.0):
        return cls("sum", scale=float(scale))

    @classmethod
    def alpha_sum(cls, alpha):
        return cls("alpha_sum", alpha=float(alpha))

    @classmethod
    def min_power(cls, scale, eta):
        return cls("min_power", scale=float(scale), eta=float(eta))

    @classmethod
    def product(cls, scale=1.0):
        return cls("product", scale=float(scale))

    @classmethod
    def tabulated(cls, matrix):
        return cls("tabulated", table=matrix)

    @property
    def n_max(self) -> Optional[int]:
        return None if self.table is None else self.table.shape[0]

    def eval(self, i: int, j: int) -> float:
        """Rate ``V_{i,j}`` for sizes ``i, j >= 1``."""
        if i < 1 or j < 1:
            raise RangeError(f"sizes must be >= 1, got ({i}, {j})")
        if self.family == "tabulated":
            if i > self.n_max or j > self.n_max:
                raise RangeError(
                    f"({i}, {j}) outside tabulated range 1..{self.n_max}"
                )
            return float(self.table[i - 1, j - 1])
        return float(self._formula(np.float64(i), np.float64(j)))

    def _formula(self, i, j):
        f = self.family
        if f == "constant":
            return self.scale + 0.0 * (i + j)
        if f == "sum":
            return self.scale * (i + j)
        if f == "alpha_sum":
            return i ** self.alpha + j ** self.alpha
        if f == "min_power":
            return self.scale * np.minimum(i, j) ** self.eta
        if f == "product":
            return self.scale * (i * j)
        raise AssertionError(f)

    def matrix(self, n: int) -> np.ndarray:
        """Dense read-only ``(n, n)`` table of ``V_{i,j}``, cached per ``n``."""
        key = ("matrix", n)
        if key not in self._cache:
            if self.family == "tabulated":
                if n > self.n_max:
                    raise RangeError(f"n={n} exceeds tabulated range {self.n_max}")
                m = np.ascontiguousarray(self.table[:n, :n])
            else:
                s = np.arange(1, n + 1, dtype=float)
                m = np.ascontiguousarray(self._formula(s[:, None], s[None, :]))
                m = np.broadcast_to(m, (n, n)).copy()
            m.flags.writeable = False
            if len(self._cache) > 8:
                self._cache.clear()
            self._cache[key] = m
        return self._cache[key]

    def factors(self, n: int) -> tuple[np.ndarray, np.ndarray]:
        """Cached factor tables of :func:`decompose` on sizes 1..n."""
        key = ("factors", n)
        if key not in self._cache:
            dec = decompose(self)
            if dec is None:
                raise ValidationError(f"{self.family} kernel is not separable")
            self._cache[key] = dec.factors(n)
        return self._cache[key]

    @property
    def growth_class(self) -> GrowthClass:
        f = self.family
        if f == "constant":
            return GrowthClass.bounded(self.scale)
        if f == "sum":
            return GrowthClass.sum_linear(self.scale)
        if f == "alpha_sum":
            return GrowthClass.alpha_sum(self.alpha)
        if f == "min_power":
            return GrowthClass.min_power(self.scale, self.eta)
        return GrowthClass.unclassified()

    def sum_bound_constant(self) -> Optional[float]:
        """Smallest C with ``V <= C*(i+j)`` for all sizes, or None if unbounded."""
        f = self.family
        if f == "constant":
            return self.scale / 2.0
        if f == "sum":
            return self.scale
        if f == "alpha_sum":
            return 1.0
        if f == "min_power":
            # min^eta <= min <= (i+j)/2 for eta <= 1; superlinear otherwise
            return self.scale / 2.0 if self.eta <= 1.0 else None
        if f == "tabulated":
            s = np.arange(1, self.n_max + 1, dtype=float)
            return float(np.max(self.table / (s[:, None] + s[None, :])))
        return None

    def label(self) -> str:
        f = self.family
        if f in ("constant", "sum", "product"):
            return f"{f}({self.scale:g})"
        if f == "alpha_sum":
            return f"alpha_sum({self.alpha:g})"
        if f == "min_power":
            return f"min_power({self.scale:g},{self.eta:g})"
        return f"tabulated(n_max={self.n_max})"

    # -- descriptors
    def to_dict(self) -> dict:
        f = self.family
        if f == "constant":
            params = {"c": self.scale}
        elif f in ("sum", "product"):
            params = {"scale": self.scale}
        elif f == "alpha_sum":
            params = {"alpha": self.alpha}
        elif f == "min_power":
            params = {"scale": self.scale, "eta": self.eta}
        else:
            params = {"table": self.table.tolist()}
        return {"family": f, "params": params}

    @classmethod
    def from_dict(cls, d: dict, base_dir: Optional[Path] = None) -> "KernelSpec":
        if not isinstance(d, dict):
            raise ConfigError("kernel: expected an object")
        unknown = set(d) - {"family", "params", "table_path"}
        if unknown:
            raise ConfigError(f"kernel: unknown field(s) {sorted(unknown)}")
        family = d.get("family")
        if family not in FAMILIES:
            raise ConfigError(f"kernel.family: expected one of {FAMILIES}, got {family!r}")
        params = dict(d.get("params") or {})
        allowed = {
            "constant": {"c"},
            "sum": {"scale"},
            "alpha_sum": {"alpha"},
            "min_power": {"scale", "eta"},
            "product": {"scale"},
            "tabulated": {"table"},
        }[family]
        unknown = set(params) - allowed
        if unknown:
            raise ConfigError(f"kernel.params: unknown field(s) {sorted(unknown)} for {family}")
        try:
            if family == "constant":
                return cls.constant(params.get("c", 1.0))
            if family == "sum":
                return cls.sum(params.get("scale", 1.0))
            if family == "alpha_sum":
                if "alpha" not in params:
                    raise ConfigError("kernel.params.alpha: required")
                return cls.alpha_sum(params["alpha"])
            if family == "min_power":
                if "eta" not in params:
                    raise ConfigError("kernel.params.eta: required")
                return cls.min_power(params.get("scale", 1.0), params["eta"])
            if family == "product":
                return cls.product(params.get("scale", 1.0))
            if "table" in params:
                return cls.tabulated(np.asarray(params["table"], dtype=float))
            if "table_path" not in d:
                raise ConfigError("kernel: tabulated family needs params.table or table_path")
            path = Path(d["table_path"])
            if base_dir is not None and not path.is_absolute():
                path = base_dir / path
            return cls.tabulated(load_table(path))
        except (TypeError, ValidationError) as exc:
            raise ConfigError(f"kernel: {exc}") from exc


def _symmetrize(table) -> np.ndarray:
    if table is None:
        raise ValidationError("tabulated kernel needs a table")
    t = np.array(table, dtype=float)
    if t.ndim != 2 or t.shape[0] != t.shape[1] or t.shape[0] < 1:
        raise ValidationError(f"kernel table must be square, got shape {t.shape}")
    if not np.all(np.isfinite(t)) or np.any(t < 0):
        raise ValidationError("kernel table entries must be finite and non-negative")
    asym = float(np.max(np.abs(t - t.T)))
    if asym > _ASYMMETRY_WARN:
        warnings.warn(
            f"kernel table asymmetric (max |V - V^T| = {asym:.3g}); averaging",
            stacklevel=3,
        )
    t = 0.5 * (t + t.T)
    t.flags.writeable = False
    return t


def load_table(path: Path) -> np.ndarray:
    path = Path(path)
    if path.suffix == ".npy":
        return np.load(path)
    if path.suffix == ".json":
        return np.asarray(json.loads(path.read_text()), dtype=float)
    return np.loadtxt(path, delimiter=",", ndmin=2)


def eval(kernel: KernelSpec, i: int, j: int) -> float:  # noqa: A001
    return kernel.eval(i, j)


def decompose(kernel: KernelSpec) -> Optional[SeparableDecomposition]:
    """Exact separable form of a built-in family, or None if there is none."""
    f, c = kernel.family, kernel.scale
    if f == "constant":
        terms = ((_const(c), _const(1.0)),)
    elif f == "sum":
        terms = ((_linear(c), _const(1.0)), (_const(c), _linear(1.0)))
    elif f == "alpha_sum":
        a = kernel.alpha
        terms = ((_power(a), _const(1.0)), (_const(1.0), _power(a)))
    elif f == "product":
        terms = ((_linear(c), _linear(1.0)),)
    else:
        return None
    return SeparableDecomposition(terms)


def verify_hypothesis(kernel: KernelSpec, growth: GrowthClass, sample_max: int) -> ExperimentReport:
    """Exhaustively check ``growth``'s bound on the grid {1..sample_max}^2."""
    if sample_max < 2:
        raise RangeError(f"sample_max must be >= 2, got {sample_max}")
    if kernel.family == "tabulated":
        sample_max = min(sample_max, kernel.n_max)
    s = np.arange(1, sample_max + 1, dtype=float)
    v = kernel.matrix(sample_max)
    bound = growth.bound(s[:, None], s[None, :])
    bad = v > bound * (1.0 + _BOUND_SLACK)
    pairs = [[int(i) + 1, int(j) + 1] for i, j in zip(*np.nonzero(bad))]
    rep = ExperimentReport(
        name=f"hypothesis:{kernel.label()}:{growth.kind}",
        claim=f"{kernel.label()} satisfies {growth.describe()}",
        parameters={
            "kernel": kernel.to_dict() if kernel.family != "tabulated" else kernel.label(),
            "growth_class": {"kind": growth.kind, "scale": growth.scale, "exponent": growth.exponent},
            "sample_max": sample_max,
        },
        experiment="verify_hypothesis",
    )
    rep.observe("violations", len(pairs), 0, "==")
    rep.observe("violating_pairs", pairs)
    rep.observe("symmetric", bool(np.array_equal(v, v.T)), True, "==")
    rep.observe("non_negative", bool(np.all(v >= 0)), True, "==")
    return rep
