# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled stack-machine kernels.

A program is a flat int32 array of (opcode, argument) pairs in postfix order
plus a float64 constant pool. Every entry point returns a status code and the
instruction index where evaluation failed, so callers can report the
offending subexpression instead of producing NaN.
"""
import numpy as np

from libc.math cimport exp, fabs, floor, isfinite, log, pow, sqrt
from libc.stdlib cimport free, malloc

cdef enum:
    OP_CONST = 0
    OP_VAR = 1
    OP_ADD = 2
    OP_MUL = 3
    OP_POW = 4
    OP_NEG = 5
    OP_INV = 6
    OP_LN = 7
    OP_SQRT = 8
    OP_ABS = 9
    OP_EXP = 10
    OP_IPOW = 11

cdef enum:
    ST_OK = 0
    ST_LOG = 1
    ST_SQRT = 2
    ST_POW = 3
    ST_DIV = 4
    ST_NONFINITE = 5


cdef double _ipow(double b, long k) noexcept nogil:
    cdef double r = 1.0
    cdef bint neg = k < 0
    if neg:
        k = -k
    while k:
        if k & 1:
            r *= b
        b *= b
        k >>= 1
    return 1.0 / r if neg else r


cdef int _run(const int[::1] code, Py_ssize_t start, Py_ssize_t stop,
              const double[::1] consts, Py_ssize_t coff,
              const double* x, double* stack, double* out, int* pos) noexcept nogil:
    cdef Py_ssize_t i
    cdef int sp = 0
    cdef int op, arg
    cdef double a, b
    for i in range(start, stop, 2):
        op = code[i]
        arg = code[i + 1]
        if op == OP_CONST:
            stack[sp] = consts[coff + arg]
            sp += 1
        elif op == OP_VAR:
            stack[sp] = x[arg]
            sp += 1
        elif op == OP_ADD:
            sp -= 1
            stack[sp - 1] += stack[sp]
        elif op == OP_MUL:
            sp -= 1
            stack[sp - 1] *= stack[sp]
        elif op == OP_POW:
            sp -= 1
            b = stack[sp]
            a = stack[sp - 1]
            if a < 0.0 and b != floor(b):
                pos[0] = <int>((i - start) // 2)
                return ST_POW
            if a == 0.0 and b < 0.0:
                pos[0] = <int>((i - start) // 2)
                return ST_DIV
            stack[sp - 1] = pow(a, b)
        elif op == OP_NEG:
            stack[sp - 1] = -stack[sp - 1]
        elif op == OP_INV:
            if stack[sp - 1] == 0.0:
                pos[0] = <int>((i - start) // 2)
                return ST_DIV
            stack[sp - 1] = 1.0 / stack[sp - 1]
        elif op == OP_LN:
            if stack[sp - 1] <= 0.0:
                pos[0] = <int>((i - start) // 2)
                return ST_LOG
            stack[sp - 1] = log(stack[sp - 1])
        elif op == OP_SQRT:
            if stack[sp - 1] < 0.0:
                pos[0] = <int>((i - start) // 2)
                return ST_SQRT
            stack[sp - 1] = sqrt(stack[sp - 1])
        elif op == OP_ABS:
            stack[sp - 1] = fabs(stack[sp - 1])
        elif op == OP_EXP:
            stack[sp - 1] = exp(stack[sp - 1])
        elif op == OP_IPOW:
            if arg < 0 and stack[sp - 1] == 0.0:
                pos[0] = <int>((i - start) // 2)
                return ST_DIV
            stack[sp - 1] = _ipow(stack[sp - 1], arg)
    out[0] = stack[0]
    if not isfinite(out[0]):
        pos[0] = <int>((stop - start) // 2 - 1)
        return ST_NONFINITE
    return ST_OK


def eval_one(const int[::1] code, const double[::1] consts, const double[::1] x):
    """Evaluate one program at one point; returns ``(value, status, pos)``."""
    cdef double out = 0.0
    cdef int pos = -1
    cdef int st
    cdef double* stack = <double*>malloc((code.shape[0] // 2 + 1) * sizeof(double))
    if stack == NULL:
        raise MemoryError()
    try:
        st = _run(code, 0, code.shape[0], consts, 0, &x[0] if x.shape[0] else NULL, stack, &out, &pos)
    finally:
        free(stack)
    return out, st, pos


def eval_batch(const int[::1] code, const double[::1] consts, const double[:, ::1] X):
    """Evaluate one program at every row of ``X``."""
    cdef Py_ssize_t m = X.shape[0]
    cdef Py_ssize_t r
    values = np.empty(m, dtype=np.float64)
    status = np.zeros(m, dtype=np.int32)
    where = np.full(m, -1, dtype=np.int32)
    cdef double[::1] vv = values
    cdef int[::1] ss = status
    cdef int[::1] ww = where
    cdef double* stack = <double*>malloc((code.shape[0] // 2 + 1) * sizeof(double))
    if stack == NULL:
        raise MemoryError()
    try:
        with nogil:
            for r in range(m):
                ss[r] = _run(code, 0, code.shape[0], consts, 0, &X[r, 0] if X.shape[1] else NULL,
                             stack, &vv[r], &ww[r])
    finally:
        free(stack)
    return values, status, where


def rk4(const int[::1] codes, const long[::1] offsets, const double[::1] consts,
        const long[::1] coffsets, y0, double eps, long steps):
    """Classical RK4 for ``y' = F(y)`` with component programs packed in ``codes``.

    Returns ``(y, status, component)``; on failure ``y`` is the last good state.
    """
    cdef Py_ssize_t k = offsets.shape[0] - 1
    cdef Py_ssize_t j, s, stage
    cdef double h = eps / steps
    cdef int st = ST_OK
    cdef int pos = -1
    cdef long maxlen = 0
    for j in range(k):
        if offsets[j + 1] - offsets[j] > maxlen:
            maxlen = offsets[j + 1] - offsets[j]
    y = np.array(y0, dtype=np.float64)
    cdef double[::1] yy = y
    tmp_arr = np.empty((5, k), dtype=np.float64)
    cdef double[:, ::1] t = tmp_arr
    cdef double* stack = <double*>malloc((maxlen // 2 + 1) * sizeof(double))
    cdef int bad = -1
    cdef double[4] coef = [0.0, 0.5, 0.5, 1.0]
    if stack == NULL:
        raise MemoryError()
    try:
        with nogil:
            for s in range(steps):
                # t[0] holds the stage input, t[1..4] the stage slopes
                for stage in range(4):
                    for j in range(k):
                        if stage == 0:
                            t[0, j] = yy[j]
                        else:
                            t[0, j] = yy[j] + coef[stage] * h * t[stage, j]
                    for j in range(k):
                        st = _run(codes, offsets[j], offsets[j + 1], consts, coffsets[j],
                                  &t[0, 0], stack, &t[stage + 1, j], &pos)
                        if st != ST_OK:
                            bad = <int>j
                            break
                    if st != ST_OK:
                        break
                if st != ST_OK:
                    break
                for j in range(k):
                    yy[j] += h / 6.0 * (t[1, j] + 2.0 * t[2, j] + 2.0 * t[3, j] + t[4, j])
                    if not isfinite(yy[j]):
                        st = ST_NONFINITE
                        bad = <int>j
                if st != ST_OK:
                    break
    finally:
        free(stack)
    return y, st, bad
