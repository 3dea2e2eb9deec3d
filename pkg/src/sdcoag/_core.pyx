# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled right-hand-side kernels.

Both entry points fill ``out`` with the truncated vector field.  Running sums
use Neumaier compensation; ``_core_py`` mirrors these contracts in numpy.
"""

cdef inline void _assemble(const double[::1] psi, const double[::1] gain,
                           const double[::1] loss, double[::1] out) noexcept nogil:
    # gain[i] = sum_{j<=i} j V_ij psi_j,  loss[i] = sum_{i<=j<=n-1} V_ij psi_j
    cdef Py_ssize_t n = psi.shape[0]
    cdef Py_ssize_t i
    if n == 1:
        out[0] = 0.0
        return
    out[0] = (0.0 - psi[0] * gain[0]) - psi[0] * loss[0]
    for i in range(1, n - 1):
        out[i] = (psi[i - 1] * gain[i - 1] - psi[i] * gain[i]) - psi[i] * loss[i]
    out[n - 1] = psi[n - 2] * gain[n - 2]


def rhs_dense(const double[:, ::1] V, const double[::1] psi,
              double[:, ::1] scratch, double[::1] out):
    """O(n^2) double loop over a dense kernel table."""
    cdef Py_ssize_t n = psi.shape[0]
    cdef Py_ssize_t i, j
    cdef double s, c, t, x
    cdef double[::1] gain = scratch[0]
    cdef double[::1] loss = scratch[1]
    with nogil:
        for i in range(n):
            s = 0.0
            c = 0.0
            for j in range(i + 1):
                x = (j + 1) * V[i, j] * psi[j]
                t = s + x
                if (s if s >= 0 else -s) >= (x if x >= 0 else -x):
                    c += (s - t) + x
                else:
                    c += (x - t) + s
                s = t
            gain[i] = s + c
            s = 0.0
            c = 0.0
            for j in range(i, n - 1):
                x = V[i, j] * psi[j]
                t = s + x
                if (s if s >= 0 else -s) >= (x if x >= 0 else -x):
                    c += (s - t) + x
                else:
                    c += (x - t) + s
                s = t
            loss[i] = s + c
        _assemble(psi, gain, loss, out)


def rhs_separable(const double[:, ::1] A, const double[:, ::1] B,
                  const double[::1] psi, double[:, ::1] prefix,
                  double[:, ::1] suffix, double[:, ::1] scratch,
                  double[::1] out):
    """O(n*K) evaluation for V_ij = sum_k A[k, i] * B[k, j]."""
    cdef Py_ssize_t K = A.shape[0]
    cdef Py_ssize_t n = psi.shape[0]
    cdef Py_ssize_t i, k
    cdef double s, c, t, x, g, l
    cdef double[::1] gain = scratch[0]
    cdef double[::1] loss = scratch[1]
    with nogil:
        for k in range(K):
            s = 0.0
            c = 0.0
            for i in range(n):
                x = B[k, i] * ((i + 1) * psi[i])
                t = s + x
                if (s if s >= 0 else -s) >= (x if x >= 0 else -x):
                    c += (s - t) + x
                else:
                    c += (x - t) + s
                s = t
                prefix[k, i] = s + c
            s = 0.0
            c = 0.0
            suffix[k, n - 1] = 0.0
            for i in range(n - 2, -1, -1):
                x = B[k, i] * psi[i]
                t = s + x
                if (s if s >= 0 else -s) >= (x if x >= 0 else -x):
                    c += (s - t) + x
                else:
                    c += (x - t) + s
                s = t
                suffix[k, i] = s + c
        for i in range(n):
            g = 0.0
            l = 0.0
            for k in range(K):
                g += A[k, i] * prefix[k, i]
                l += A[k, i] * suffix[k, i]
            gain[i] = g
            loss[i] = l
        _assemble(psi, gain, loss, out)
