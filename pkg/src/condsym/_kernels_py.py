"""Pure-Python fallback with the same API as the compiled ``_kernels`` module.

Single-point evaluation uses a Python function generated from the program
(one ``def`` per program, cached), falling back to the stack interpreter only
to locate a failing instruction. Batch evaluation interprets the program once
over numpy columns.
"""
from __future__ import annotations

import math

import numpy as np

OP_CONST, OP_VAR, OP_ADD, OP_MUL, OP_POW, OP_NEG, OP_INV, OP_LN, OP_SQRT, OP_ABS, OP_EXP, OP_IPOW = range(12)
ST_OK, ST_LOG, ST_SQRT, ST_POW, ST_DIV, ST_NONFINITE = range(6)


class _Fail(Exception):
    pass


def _interpret(code, start, stop, consts, coff, x):
    stack = []
    for i in range(start, stop, 2):
        op = int(code[i])
        arg = int(code[i + 1])
        p = (i - start) // 2
        if op == OP_CONST:
            stack.append(float(consts[coff + arg]))
        elif op == OP_VAR:
            stack.append(float(x[arg]))
        elif op == OP_ADD:
            b = stack.pop()
            stack[-1] += b
        elif op == OP_MUL:
            b = stack.pop()
            stack[-1] *= b
        elif op == OP_POW:
            b = stack.pop()
            a = stack[-1]
            if a < 0.0 and b != math.floor(b):
                return 0.0, ST_POW, p
            if a == 0.0 and b < 0.0:
                return 0.0, ST_DIV, p
            try:
                stack[-1] = math.pow(a, b)
            except OverflowError:
                return 0.0, ST_NONFINITE, p
        elif op == OP_NEG:
            stack[-1] = -stack[-1]
        elif op == OP_INV:
            if stack[-1] == 0.0:
                return 0.0, ST_DIV, p
            stack[-1] = 1.0 / stack[-1]
        elif op == OP_LN:
            if stack[-1] <= 0.0:
                return 0.0, ST_LOG, p
            stack[-1] = math.log(stack[-1])
        elif op == OP_SQRT:
            if stack[-1] < 0.0:
                return 0.0, ST_SQRT, p
            stack[-1] = math.sqrt(stack[-1])
        elif op == OP_ABS:
            stack[-1] = abs(stack[-1])
        elif op == OP_EXP:
            try:
                stack[-1] = math.exp(stack[-1])
            except OverflowError:
                return 0.0, ST_NONFINITE, p
        elif op == OP_IPOW:
            if arg < 0 and stack[-1] == 0.0:
                return 0.0, ST_DIV, p
            try:
                stack[-1] = stack[-1] ** arg
            except OverflowError:
                return 0.0, ST_NONFINITE, p
    v = stack[0]
    if not math.isfinite(v):
        return v, ST_NONFINITE, (stop - start) // 2 - 1
    return v, ST_OK, -1


def _pw(a, b):
    if a < 0.0 and b != math.floor(b):
        raise _Fail
    return math.pow(a, b)


def _codegen(code, start, stop, consts, coff):
    stack = []
    for i in range(start, stop, 2):
        op = int(code[i])
        arg = int(code[i + 1])
        if op == OP_CONST:
            stack.append(repr(float(consts[coff + arg])))
        elif op == OP_VAR:
            stack.append(f"x[{arg}]")
        elif op in (OP_ADD, OP_MUL, OP_POW):
            b = stack.pop()
            a = stack.pop()
            stack.append(f"({a}+{b})" if op == OP_ADD else f"({a}*{b})" if op == OP_MUL else f"_pw({a},{b})")
        elif op == OP_NEG:
            stack.append(f"(-{stack.pop()})")
        elif op == OP_INV:
            stack.append(f"(1.0/{stack.pop()})")
        elif op == OP_IPOW:
            stack.append(f"({stack.pop()}**{arg})")
        else:
            fn = {OP_LN: "_ln", OP_SQRT: "_sqrt", OP_ABS: "abs", OP_EXP: "_exp"}[op]
            stack.append(f"{fn}({stack.pop()})")
    src = f"def _f(x):\n    return {stack[0]}\n"
    ns = {"_pw": _pw, "_ln": math.log, "_sqrt": math.sqrt, "_exp": math.exp}
    try:
        exec(compile(src, "<program>", "exec"), ns)
    except (RecursionError, MemoryError, SyntaxError):
        return None
    return ns["_f"]


_CACHE: dict = {}


def _fast(code, start, stop, consts, coff):
    key = (bytes(np.asarray(code[start:stop], dtype=np.int32)), bytes(np.asarray(consts, dtype=np.float64)), coff)
    f = _CACHE.get(key)
    if f is None:
        if len(_CACHE) > 4096:
            _CACHE.clear()
        f = _codegen(code, start, stop, consts, coff) or False
        _CACHE[key] = f
    return f


def _eval_range(code, start, stop, consts, coff, x):
    f = _fast(code, start, stop, consts, coff)
    if f:
        try:
            v = f(x)
        except (_Fail, ValueError, ZeroDivisionError, OverflowError):
            return _interpret(code, start, stop, consts, coff, x)
        if isinstance(v, float) and math.isfinite(v):
            return v, ST_OK, -1
    return _interpret(code, start, stop, consts, coff, x)


def eval_one(code, consts, x):
    """Evaluate one program at one point; returns ``(value, status, pos)``."""
    return _eval_range(code, 0, len(code), consts, 0, [float(v) for v in x])


def eval_batch(code, consts, X):
    """Evaluate one program at every row of ``X`` (vectorized over rows)."""
    X = np.asarray(X, dtype=np.float64)
    m = X.shape[0]
    status = np.zeros(m, dtype=np.int32)
    where = np.full(m, -1, dtype=np.int32)
    stack = []
    with np.errstate(all="ignore"):
        for p, i in enumerate(range(0, len(code), 2)):
            op = int(code[i])
            arg = int(code[i + 1])
            ok = status == 0
            if op == OP_CONST:
                stack.append(np.full(m, float(consts[arg])))
            elif op == OP_VAR:
                stack.append(X[:, arg].copy())
            elif op == OP_ADD:
                b = stack.pop()
                stack[-1] = stack[-1] + b
            elif op == OP_MUL:
                b = stack.pop()
                stack[-1] = stack[-1] * b
            elif op == OP_POW:
                b = stack.pop()
                a = stack[-1]
                bad = ok & (a < 0) & (b != np.floor(b))
                status[bad], where[bad] = ST_POW, p
                bad = ok & (a == 0) & (b < 0)
                status[bad], where[bad] = ST_DIV, p
                stack[-1] = np.power(np.abs(a), b) * np.where((a < 0) & (np.mod(b, 2) == 1), -1.0, 1.0)
            elif op == OP_NEG:
                stack[-1] = -stack[-1]
            elif op == OP_INV:
                bad = ok & (stack[-1] == 0)
                status[bad], where[bad] = ST_DIV, p
                stack[-1] = 1.0 / stack[-1]
            elif op == OP_LN:
                bad = ok & (stack[-1] <= 0)
                status[bad], where[bad] = ST_LOG, p
                stack[-1] = np.log(stack[-1])
            elif op == OP_SQRT:
                bad = ok & (stack[-1] < 0)
                status[bad], where[bad] = ST_SQRT, p
                stack[-1] = np.sqrt(stack[-1])
            elif op == OP_ABS:
                stack[-1] = np.abs(stack[-1])
            elif op == OP_EXP:
                stack[-1] = np.exp(stack[-1])
            elif op == OP_IPOW:
                if arg < 0:
                    bad = ok & (stack[-1] == 0)
                    status[bad], where[bad] = ST_DIV, p
                stack[-1] = _int_power(stack[-1], arg)
    values = stack[0] if stack else np.zeros(m)
    bad = (status == 0) & ~np.isfinite(values)
    status[bad], where[bad] = ST_NONFINITE, len(code) // 2 - 1
    return values, status, where


def _int_power(a, k):
    # repeated squaring keeps agreement with the compiled kernel bit-for-bit
    neg = k < 0
    k = abs(k)
    r = np.ones_like(a)
    b = a.copy()
    while k:
        if k & 1:
            r = r * b
        b = b * b
        k >>= 1
    return 1.0 / r if neg else r


def rk4(codes, offsets, consts, coffsets, y0, eps, steps):
    """Classical RK4 for ``y' = F(y)``; returns ``(y, status, component)``."""
    k = len(offsets) - 1
    fns = [_fast(codes, int(offsets[j]), int(offsets[j + 1]), consts, int(coffsets[j])) for j in range(k)]
    y = [float(v) for v in y0]
    h = eps / steps

    def F(state):
        out = []
        for j in range(k):
            f = fns[j]
            if f:
                try:
                    v = f(state)
                    if math.isfinite(v):
                        out.append(v)
                        continue
                except (_Fail, ValueError, ZeroDivisionError, OverflowError):
                    pass
            v, st, _ = _interpret(codes, int(offsets[j]), int(offsets[j + 1]), consts, int(coffsets[j]), state)
            if st != ST_OK:
                raise _StageError(st, j)
            out.append(v)
        return out

    try:
        for _ in range(steps):
            k1 = F(y)
            k2 = F([a + 0.5 * h * b for a, b in zip(y, k1)])
            k3 = F([a + 0.5 * h * b for a, b in zip(y, k2)])
            k4 = F([a + h * b for a, b in zip(y, k3)])
            nxt = [a + h / 6.0 * (b1 + 2.0 * b2 + 2.0 * b3 + b4) for a, b1, b2, b3, b4 in zip(y, k1, k2, k3, k4)]
            for j, v in enumerate(nxt):
                if not math.isfinite(v):
                    return np.array(y), ST_NONFINITE, j
            y = nxt
    except _StageError as exc:
        return np.array(y), exc.status, exc.component
    return np.array(y), ST_OK, -1


class _StageError(Exception):
    def __init__(self, status, component):
        super().__init__(status)
        self.status = status
        self.component = component
