"""Numeric oracles: finite-difference operator residuals, quadrature, RK4 flows.

These are deliberately independent of the symbolic engine: they only see
black-box evaluators, so agreement with a symbolic result is real evidence.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np
from scipy import integrate

from condsym import kernels


class NumericsError(ValueError):
    pass


class SingularSetError(NumericsError):
    pass


class QuadratureError(NumericsError):
    pass


class FlowError(NumericsError):
    pass


class ScalarField:
    """Black-box field ``u(x_0, ..., x_n)`` with a declared singular set.

    ``singular_distance(x)`` returns a lower bound on the distance from ``x``
    to the singular set (0 inside it). ``batch`` optionally evaluates many
    points at once; otherwise ``fn`` is called row by row.
    """

    def __init__(self, fn: Callable, dim: int, singular_distance: Optional[Callable] = None,
                 batch: Optional[Callable] = None, name: str = "u"):
        self.fn = fn
        self.dim = dim
        self.singular_distance = singular_distance
        self._batch = batch
        self.name = name

    def check(self, x, margin: float = 0.0):
        if self.singular_distance is None:
            return
        d = float(self.singular_distance(np.asarray(x, dtype=float)))
        if d <= margin:
            raise SingularSetError(f"point {np.round(np.asarray(x, dtype=float), 6).tolist()} is within {margin:g} of the singular set of {self.name} (distance {d:.3g})")

    def __call__(self, x) -> float:
        x = np.asarray(x, dtype=float)
        self.check(x)
        return float(self.fn(x))

    def batch(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        if self._batch is not None:
            return np.asarray(self._batch(X), dtype=float)
        return np.array([float(self.fn(x)) for x in X])


@dataclass
class FDConfig:
    h: float = 1e-4
    levels: int = 2
    tol: float = 1e-6
    relative_step: bool = True
    margin_factor: float = 10.0

    def __post_init__(self):
        if self.h <= 0 or self.tol <= 0:
            raise ValueError("h and tol must be positive")
        if self.levels < 1:
            raise ValueError("levels must be >= 1")

    def step(self, x) -> float:
        """Smallest stencil step, rounded down to a power of two so ``x +- h`` is exact."""
        h = self.h if not self.relative_step else self.h * max(1.0, float(np.max(np.abs(x))))
        return float(2.0 ** np.floor(np.log2(h)))


@dataclass
class LinearDiffOp:
    """``L f = A(x):Hess f + b(x).grad f + c(x, f)`` on ``dim`` coordinates."""

    dim: int
    second: Optional[Callable] = None
    first: Optional[Callable] = None
    zeroth: Optional[Callable] = None
    name: str = "L"


def dalembert_op(n: int, F: Optional[Callable] = None, signature: str = "paper") -> LinearDiffOp:
    """``-d00 + sum daa - F(x, u)``; ``signature='conventional'`` flips the sign of the principal part."""
    diag = np.ones(n + 1)
    diag[0] = -1.0
    if signature == "conventional":
        diag = -diag
    elif signature != "paper":
        raise ValueError(f"unknown signature {signature!r}")
    A = np.diag(diag)
    zeroth = (lambda x, u: -F(x, u)) if F is not None else None
    return LinearDiffOp(n + 1, second=lambda x: A, zeroth=zeroth, name="box")


def euler_op(n: int, alpha: float) -> LinearDiffOp:
    """``x_mu d_mu + alpha`` (the first additional condition)."""
    return LinearDiffOp(n + 1, first=lambda x: np.asarray(x, dtype=float),
                        zeroth=lambda x, u: alpha * u, name="add1")


def second_euler_op(n: int, alpha: float) -> LinearDiffOp:
    """``x_mu x_nu d_mu d_nu + alpha x_mu d_mu`` (the second additional condition)."""
    return LinearDiffOp(n + 1, second=lambda x: np.outer(x, x),
                        first=lambda x: alpha * np.asarray(x, dtype=float), name="add2")


def _richardson(values: list, order: int = 2) -> float:
    """Extrapolate estimates at steps s, s/2, s/4, ... with error series in s^2."""
    table = list(values)
    p = order
    while len(table) > 1:
        f = 2.0 ** p
        table = [(f * table[i + 1] - table[i]) / (f - 1.0) for i in range(len(table) - 1)]
        p += 2
    return table[0]


def _stencil(x, A, b, h, levels):
    """Collect the FD stencil points needed for the non-zero entries of A, b."""
    d = len(x)
    pts = [x.copy()]
    plan = []  # (kind, i, j, level, indices into pts)
    for lev in range(levels):
        s = h * 2.0 ** (levels - 1 - lev)
        for i in range(d):
            need_first = b is not None and b[i] != 0.0
            need_diag = A is not None and A[i, i] != 0.0
            if need_first or need_diag:
                e = np.zeros(d)
                e[i] = s
                k = len(pts)
                pts.extend([x + e, x - e])
                if need_first:
                    plan.append(("d1", i, i, lev, (k, k + 1)))
                if need_diag:
                    plan.append(("d2", i, i, lev, (k, k + 1)))
            if A is None:
                continue
            for j in range(i + 1, d):
                if A[i, j] == 0.0 and A[j, i] == 0.0:
                    continue
                ei = np.zeros(d)
                ej = np.zeros(d)
                ei[i] = s
                ej[j] = s
                k = len(pts)
                pts.extend([x + ei + ej, x + ei - ej, x - ei + ej, x - ei - ej])
                plan.append(("mix", i, j, lev, (k, k + 1, k + 2, k + 3)))
    return np.array(pts), plan


def fd_operator_residual(f: ScalarField, op: LinearDiffOp, x, cfg: Optional[FDConfig] = None) -> float:
    """Apply ``op`` to ``f`` at ``x`` by Richardson-extrapolated central differences."""
    cfg = cfg or FDConfig()
    x = np.asarray(x, dtype=float)
    if op.dim > f.dim or len(x) != f.dim:
        raise NumericsError(f"operator on {op.dim} coordinates applied to a field of {f.dim} at a point of length {len(x)}")
    h = cfg.step(x)
    f.check(x, margin=cfg.margin_factor * h)
    xx = x[: op.dim]
    A = np.asarray(op.second(xx), dtype=float) if op.second is not None else None
    b = np.asarray(op.first(xx), dtype=float) if op.first is not None else None
    pts, plan = _stencil(x, A if A is None else _pad(A, f.dim), b if b is None else _pad(b, f.dim), h, cfg.levels)
    vals = f.batch(pts)
    if not np.all(np.isfinite(vals)):
        raise SingularSetError(f"non-finite field value on the stencil around {x.tolist()}")
    u0 = vals[0]
    est: dict = {}
    for kind, i, j, lev, idx in plan:
        s = h * 2.0 ** (cfg.levels - 1 - lev)
        if kind == "d1":
            v = (vals[idx[0]] - vals[idx[1]]) / (2 * s)
        elif kind == "d2":
            v = (vals[idx[0]] - 2 * u0 + vals[idx[1]]) / (s * s)
        else:
            v = (vals[idx[0]] - vals[idx[1]] - vals[idx[2]] + vals[idx[3]]) / (4 * s * s)
        est.setdefault((kind, i, j), []).append(v)
    total = 0.0
    for (kind, i, j), seq in est.items():
        d = _richardson(seq)
        if kind == "d1":
            total += b[i] * d
        elif kind == "d2":
            total += A[i, i] * d
        else:
            total += (A[i, j] + A[j, i]) * d
    if op.zeroth is not None:
        total += float(op.zeroth(xx, u0))
    return float(total)


def _pad(a, d):
    if a.ndim == 1:
        out = np.zeros(d)
        out[: len(a)] = a
        return out
    out = np.zeros((d, d))
    out[: a.shape[0], : a.shape[1]] = a
    return out


def fd_gradient(f: ScalarField, x, cfg: Optional[FDConfig] = None) -> np.ndarray:
    """Gradient by the same extrapolated central differences."""
    out = []
    for i in range(f.dim):
        b = np.zeros(f.dim)
        b[i] = 1.0
        out.append(fd_operator_residual(f, LinearDiffOp(f.dim, first=lambda _x, b=b: b), x, cfg))
    return np.array(out)


# -------------------------------------------------------------- quadrature
def quadrature(g: Callable, a: float, b: float, tol: float = 1e-10, singular: Sequence[float] = (),
               limit: int = 10000) -> float:
    """Adaptive Gauss-Kronrod quadrature of ``g`` over ``[a, b]``.

    Points listed in ``singular`` must lie outside the closed interval. The
    result is accepted only if the estimated absolute error is within ``tol``
    and the integrator raised no warning.
    """
    lo, hi = min(a, b), max(a, b)
    for s in singular:
        if lo <= s <= hi:
            raise QuadratureError(f"integrand singularity at {s:g} inside [{lo:g}, {hi:g}]")
    if a == b:
        return 0.0
    with warnings.catch_warnings():
        warnings.simplefilter("error", integrate.IntegrationWarning)
        try:
            val, err = integrate.quad(g, a, b, epsabs=tol, epsrel=0.0, limit=limit)
        except integrate.IntegrationWarning as exc:
            raise QuadratureError(f"no convergence on [{a:g}, {b:g}]: {str(exc).splitlines()[0]}") from None
        except (ZeroDivisionError, ValueError) as exc:
            raise QuadratureError(f"integrand failed on [{a:g}, {b:g}]: {exc}") from None
    if not np.isfinite(val) or err > tol:
        raise QuadratureError(f"error estimate {err:.3g} exceeds tolerance {tol:.3g} on [{a:g}, {b:g}]")
    return float(val)


# -------------------------------------------------------------------- flows
class ProgramField:
    """Autonomous vector field whose components are compiled programs over the state."""

    def __init__(self, programs):
        self.programs = list(programs)
        self.codes = np.concatenate([p.code for p in self.programs]).astype(np.int32)
        lens = [len(p.code) for p in self.programs]
        self.offsets = np.concatenate([[0], np.cumsum(lens)]).astype(np.int64)
        clens = [len(p.consts) for p in self.programs]
        self.consts = np.concatenate([p.consts for p in self.programs]).astype(np.float64)
        self.coffsets = np.concatenate([[0], np.cumsum(clens)[:-1]]).astype(np.int64)

    def __call__(self, y) -> np.ndarray:
        return np.array([p(y) for p in self.programs])


def flow_integrate(field, state0, epsilon: float, steps: int) -> np.ndarray:
    """Fixed-step classical RK4 for ``dX/deps = field(X)`` from 0 to ``epsilon``."""
    if steps < 1:
        raise ValueError("steps must be >= 1")
    y0 = np.asarray(state0, dtype=np.float64)
    if isinstance(field, ProgramField):
        y, st, comp = kernels.rk4(field.codes, field.offsets, field.consts, field.coffsets,
                                  np.ascontiguousarray(y0), float(epsilon), int(steps))
        if st:
            raise FlowError(f"flow failed ({kernels.STATUS[int(st)]}) in component {comp}")
        return np.asarray(y)
    h = epsilon / steps
    y = y0.copy()
    for _ in range(steps):
        k1 = np.asarray(field(y), dtype=float)
        k2 = np.asarray(field(y + 0.5 * h * k1), dtype=float)
        k3 = np.asarray(field(y + 0.5 * h * k2), dtype=float)
        k4 = np.asarray(field(y + h * k3), dtype=float)
        y = y + h / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
        if not np.all(np.isfinite(y)):
            raise FlowError("non-finite state during flow integration")
    return y


def convergence_order(field, state0, epsilon: float, exact=None, steps: int = 8) -> float:
    """Observed order from step halving: log2(e(N) / e(2N)).

    Without an exact solution the errors are measured against a 16N-step run.
    """
    if exact is None:
        exact = flow_integrate(field, state0, epsilon, 16 * steps)
    e1 = np.max(np.abs(flow_integrate(field, state0, epsilon, steps) - exact))
    e2 = np.max(np.abs(flow_integrate(field, state0, epsilon, 2 * steps) - exact))
    return float(np.log2(e1 / e2))
