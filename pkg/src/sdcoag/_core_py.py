"""Pure-numpy fallback for the compiled kernels in ``_core.pyx``.

Same signatures and output contracts.  Running sums use a vectorised
error-free transformation instead of a scalar Neumaier loop.
"""
import numpy as np


def compensated_cumsum(x, axis=-1):
    """Prefix sums of ``x`` corrected by the exact rounding error of each add."""
    x = np.asarray(x, dtype=np.float64)
    s = np.cumsum(x, axis=axis)
    x = np.moveaxis(x, axis, -1)
    sm = np.moveaxis(s, axis, -1)
    a, b, r = sm[..., :-1], x[..., 1:], sm[..., 1:]
    bv = r - a
    err = (a - (r - bv)) + (b - bv)
    corr = np.zeros_like(sm)
    corr[..., 1:] = np.cumsum(err, axis=-1)
    return np.moveaxis(sm + corr, -1, axis)


def _assemble(psi, gain, loss, out):
    n = psi.shape[0]
    if n == 1:
        out[0] = 0.0
        return
    out[0] = (0.0 - psi[0] * gain[0]) - psi[0] * loss[0]
    out[1:n - 1] = (psi[:n - 2] * gain[:n - 2] - psi[1:n - 1] * gain[1:n - 1]) - psi[1:n - 1] * loss[1:n - 1]
    out[n - 1] = psi[n - 2] * gain[n - 2]


def rhs_dense(V, psi, scratch, out):
    n = psi.shape[0]
    weighted = np.arange(1, n + 1, dtype=np.float64) * psi
    gain, loss = scratch[0], scratch[1]
    # one dot per row over contiguous slices: no (n, n) temporaries
    for i in range(n):
        gain[i] = np.dot(V[i, :i + 1], weighted[:i + 1])
        loss[i] = np.dot(V[i, i:n - 1], psi[i:n - 1])
    _assemble(psi, gain, loss, out)


def rhs_separable(A, B, psi, prefix, suffix, scratch, out):
    n = psi.shape[0]
    sizes = np.arange(1, n + 1, dtype=np.float64)
    prefix[:] = compensated_cumsum(B * (sizes * psi), axis=1)
    suffix[:, n - 1] = 0.0
    if n > 1:
        tail = (B * psi)[:, n - 2::-1]
        suffix[:, n - 2::-1] = compensated_cumsum(tail, axis=1)
    gain, loss = scratch[0], scratch[1]
    gain[:] = 0.0
    loss[:] = 0.0
    for k in range(A.shape[0]):
        gain += A[k] * prefix[k]
        loss += A[k] * suffix[k]
    _assemble(psi, gain, loss, out)
