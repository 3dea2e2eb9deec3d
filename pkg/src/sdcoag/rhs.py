"""The truncated vector field and the weighted-moment rate identity.

Two evaluation paths share one contract:

* :func:`rhs_reference` is the literal O(n^2) double loop over ``V[i, j]``.
* :func:`rhs_fast` needs an exact separable kernel and runs in O(n*K) using
  one forward prefix pass and one backward suffix pass per factor term.

The compiled ``_core`` extension backs both when it was built; otherwise the
numpy fallback in ``_core_py`` is used.  Set ``SDCOAG_BACKEND=python`` to force
the fallback.
"""
from __future__ import annotations

import math
import os
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import _core_py
from .errors import RangeError, UnsupportedKernelError
from .kernel import KernelSpec, decompose
from .state import StateLike, WeightSequence, _arr

BACKENDS = {"python": _core_py}
try:
    from . import _core as _core_c
except ImportError:  # extension not built
    _core_c = None
else:
    BACKENDS["cython"] = _core_c

if os.environ.get("SDCOAG_BACKEND", "").lower() == "python" or _core_c is None:
    BACKEND = "python"
else:
    BACKEND = "cython"


def _impl(backend: Optional[str]):
    name = backend or BACKEND
    try:
        return BACKENDS[name]
    except KeyError:
        raise ValueError(f"backend {name!r} unavailable; have {sorted(BACKENDS)}") from None


@dataclass
class RhsWorkspace:
    """Caller-owned buffers for repeated evaluations at a fixed ``n``.

    One workspace per concurrent simulation; the contents only carry meaning
    inside a single call.
    """

    n: int
    terms: int = 2
    prefix_sums: np.ndarray = field(init=False, repr=False)
    suffix_sums: np.ndarray = field(init=False, repr=False)
    scratch: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if self.n < 1:
            raise RangeError(f"n must be >= 1, got {self.n}")
        self.prefix_sums = np.zeros((self.terms, self.n))
        self.suffix_sums = np.zeros((self.terms, self.n))
        self.scratch = np.zeros((2, self.n))

    def fits(self, n: int, terms: int) -> bool:
        return self.n == n and self.terms >= terms


def rhs_reference(kernel: KernelSpec, state: StateLike, ws: Optional[RhsWorkspace] = None,
                  out: Optional[np.ndarray] = None, backend: Optional[str] = None) -> np.ndarray:
    """Vector field by direct double summation over the dense kernel table."""
    psi = np.ascontiguousarray(_arr(state))
    n = psi.size
    if ws is None or ws.n != n:
        ws = RhsWorkspace(n, terms=1)
    if out is None:
        out = np.empty(n)
    _impl(backend).rhs_dense(kernel.matrix(n), psi, ws.scratch, out)
    return out


def rhs_fast(kernel: KernelSpec, state: StateLike, ws: Optional[RhsWorkspace] = None,
             out: Optional[np.ndarray] = None, backend: Optional[str] = None) -> np.ndarray:
    """Vector field via prefix/suffix sums; separable kernels only."""
    if decompose(kernel) is None:
        raise UnsupportedKernelError(f"{kernel.family} kernel has no exact separable form")
    psi = np.ascontiguousarray(_arr(state))
    n = psi.size
    a, b = kernel.factors(n)
    k = a.shape[0]
    if ws is None or not ws.fits(n, k):
        ws = RhsWorkspace(n, terms=k)
    if out is None:
        out = np.empty(n)
    _impl(backend).rhs_separable(a, b, psi, ws.prefix_sums[:k], ws.suffix_sums[:k], ws.scratch, out)
    return out


def make_rhs(kernel: KernelSpec, n: int, backend: Optional[str] = None):
    """Return ``f(psi, out) -> out`` bound to a private workspace.

    Separable kernels take the fast path; the rest fall back to the reference.
    """
    impl = _impl(backend)
    dec = decompose(kernel)
    if dec is not None:
        a, b = kernel.factors(n)
        ws = RhsWorkspace(n, terms=a.shape[0])

        def f(psi, out):
            impl.rhs_separable(a, b, psi, ws.prefix_sums, ws.suffix_sums, ws.scratch, out)
            return out
    else:
        v = kernel.matrix(n)
        ws = RhsWorkspace(n, terms=1)

        def f(psi, out):
            impl.rhs_dense(v, psi, ws.scratch, out)
            return out
    return f


def moment_rate(kernel: KernelSpec, state: StateLike, g: WeightSequence) -> float:
    """Closed-form time derivative of ``sum_i g_i psi_i`` along the truncated flow.

    ``sum_{i=1}^{n-1} sum_{j=i}^{n-1} (i*g_{j+1} - i*g_j - g_i) V_ij psi_i psi_j``
    """
    psi = _arr(state)
    n = psi.size
    if n < 2:
        return 0.0
    gv = g.values(n)
    m = n - 1
    i = np.arange(1, m + 1, dtype=np.float64)[:, None]
    coef = i * gv[None, 1:n] - i * gv[None, :m] - gv[:m, None]
    terms = coef * kernel.matrix(n)[:m, :m] * psi[:m, None] * psi[None, :m]
    return math.fsum(np.triu(terms).ravel())
