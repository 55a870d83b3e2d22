"""Embedded explicit Runge-Kutta comparators: Merson 4(3) and Fehlberg 4(5)."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .controller import ControllerConfig, IntegrationReport
from .exceptions import MaxStepsExceeded, NonFiniteState, StepSizeUnderflow
from .problem import ToleranceSpec

try:
    import numba
except ImportError:  # pragma: no cover
    numba = None

__all__ = [
    "ExplicitTableau",
    "MERSON4",
    "FEHLBERG45",
    "TABLEAUX",
    "erk_step",
    "erk_fixed",
    "erk_integrate",
    "erk_solve",
]


@dataclass(frozen=True, eq=False)
class ExplicitTableau:
    """Butcher tableau with an embedded solution.

    ``order`` is the order of the propagated solution ``b`` and
    ``embedded_order`` that of ``bhat``; the step size exponent is
    ``1/(embedded_order + 1)``.
    """

    name: str
    c: np.ndarray
    A: np.ndarray
    b: np.ndarray
    bhat: np.ndarray
    order: int
    embedded_order: int

    def __post_init__(self):
        A = np.array(self.A, dtype=float)
        c = np.array(self.c, dtype=float)
        b = np.array(self.b, dtype=float)
        bhat = np.array(self.bhat, dtype=float)
        s = b.shape[0]
        if A.shape != (s, s) or c.shape != (s,) or bhat.shape != (s,):
            raise ValueError("inconsistent tableau shapes")
        if np.any(np.triu(A) != 0):
            raise ValueError("coupling matrix must be strictly lower triangular")
        if not np.allclose(A.sum(axis=1), c, atol=1e-14):
            raise ValueError("row sums of A must equal c")
        if abs(b.sum() - 1) > 1e-14 or abs(bhat.sum() - 1) > 1e-14:
            raise ValueError("weights must sum to one")
        for name, value in (("A", A), ("c", c), ("b", b), ("bhat", bhat)):
            value.flags.writeable = False
            object.__setattr__(self, name, value)

    @property
    def stages(self) -> int:
        return self.b.shape[0]


MERSON4 = ExplicitTableau(
    name="rkm4",
    c=[0.0, 1 / 3, 1 / 3, 1 / 2, 1.0],
    A=[
        [0, 0, 0, 0, 0],
        [1 / 3, 0, 0, 0, 0],
        [1 / 6, 1 / 6, 0, 0, 0],
        [1 / 8, 0, 3 / 8, 0, 0],
        [1 / 2, 0, -3 / 2, 2, 0],
    ],
    b=[1 / 6, 0, 0, 2 / 3, 1 / 6],
    bhat=[1 / 10, 0, 3 / 10, 2 / 5, 1 / 5],
    order=4,
    embedded_order=3,
)

# Fehlberg's pair, advancing with the fifth-order weights
FEHLBERG45 = ExplicitTableau(
    name="rkf5",
    c=[0.0, 1 / 4, 3 / 8, 12 / 13, 1.0, 1 / 2],
    A=[
        [0, 0, 0, 0, 0, 0],
        [1 / 4, 0, 0, 0, 0, 0],
        [3 / 32, 9 / 32, 0, 0, 0, 0],
        [1932 / 2197, -7200 / 2197, 7296 / 2197, 0, 0, 0],
        [439 / 216, -8, 3680 / 513, -845 / 4104, 0, 0],
        [-8 / 27, 2, -3544 / 2565, 1859 / 4104, -11 / 40, 0],
    ],
    b=[16 / 135, 0, 6656 / 12825, 28561 / 56430, -9 / 50, 2 / 55],
    bhat=[25 / 216, 0, 1408 / 2565, 2197 / 4104, -1 / 5, 0],
    order=5,
    embedded_order=4,
)

TABLEAUX = {"rkm4": MERSON4, "rkf5": FEHLBERG45}


def erk_step(y, h, f, tableau):
    """One explicit step; returns ``(y_next, y_next_embedded)``.

    Raises
    ------
    NonFiniteState
        If the result overflows.
    """
    y = np.asarray(y, dtype=float)
    s = tableau.stages
    K = np.empty((s, y.shape[0]))
    with np.errstate(over="ignore", invalid="ignore"):
        for i in range(s):
            K[i] = h * np.asarray(f(y + tableau.A[i, :i] @ K[:i]), dtype=float)
        y_next = y + tableau.b @ K
        y_emb = y + tableau.bhat @ K
    if not (np.all(np.isfinite(y_next)) and np.all(np.isfinite(y_emb))):
        raise NonFiniteState(f"non-finite stage values for h={h:g}")
    return y_next, y_emb


def erk_fixed(f, y0, t0, tk, n_steps, tableau=FEHLBERG45):
    """``n_steps`` equal steps without error control; returns the final state."""
    y = np.array(y0, dtype=float, ndmin=1)
    h = (tk - t0) / n_steps
    for _ in range(n_steps):
        y, _ = erk_step(y, h, f, tableau)
    return y


_OK, _UNDERFLOW, _MAX_STEPS = 0, 1, 2


def _erk_loop(f, y0, t0, tk, h, A, b, bhat, atol, rtol, exponent, safety, max_growth,
              h_min, h_max, reject_floor, max_steps, store):
    # Written in the numba-compatible subset: compiled as-is for jitted f.
    n = y0.shape[0]
    s = b.shape[0]
    K = np.empty((s, n))
    y = y0.copy()
    t = t0
    cap = 1024 if store else 1
    ts = np.empty(cap)
    ys = np.empty((cap, n))
    count = 0
    if store:
        ts[0] = t
        ys[0] = y
        count = 1
    n_acc = 0
    n_rej = 0
    n_f = 0
    attempts = 0
    status = _OK
    while t < tk:
        attempts += 1
        if attempts > max_steps:
            status = _MAX_STEPS
            break
        landing = h >= tk - t
        for i in range(s):
            yi = y.copy()
            for j in range(i):
                if A[i, j] != 0.0:
                    yi += A[i, j] * K[j]
            K[i] = h * f(yi)
        n_f += s
        y_new = y.copy()
        diff = np.zeros(n)
        for i in range(s):
            y_new += b[i] * K[i]
            diff += (b[i] - bhat[i]) * K[i]
        finite = True
        for k in range(n):
            if not (math.isfinite(y_new[k]) and math.isfinite(diff[k])):
                finite = False
        if not finite:
            n_rej += 1
            h = 0.5 * h
            if h < h_min:
                status = _UNDERFLOW
                break
            continue
        err = 0.0
        for k in range(n):
            d = abs(diff[k])
            if d != 0.0:
                e = d / (atol[k] + rtol[k] * abs(y[k]))
                if e > err:
                    err = e
        if err <= 1.0:
            n_acc += 1
            t = tk if landing else t + h
            y = y_new
            if store:
                if count == ts.shape[0]:
                    ts2 = np.empty(2 * count)
                    ys2 = np.empty((2 * count, n))
                    ts2[:count] = ts
                    ys2[:count] = ys
                    ts = ts2
                    ys = ys2
                ts[count] = t
                ys[count] = y
                count += 1
            if err == 0.0:
                q = max_growth
            else:
                q = min(max_growth, safety * err ** (-exponent))
            h = min(q * h, h_max)
            remaining = tk - t
            if remaining <= h * (1.0 + 1e-8):
                h = remaining
        else:
            n_rej += 1
            h = max(reject_floor, safety * err ** (-exponent)) * h
            if h < h_min:
                status = _UNDERFLOW
                break
    return t, y, n_acc, n_rej, n_f, status, ts[:count], ys[:count]


_erk_loop_jit = None


def _jitted_loop():
    global _erk_loop_jit
    if _erk_loop_jit is None:
        _erk_loop_jit = numba.njit(_erk_loop)
    return _erk_loop_jit


def _is_jitted(f):
    return numba is not None and isinstance(f, numba.core.registry.CPUDispatcher)


def erk_integrate(problem, tol, tableau=FEHLBERG45, config=ControllerConfig()):
    """Integrate a :class:`~asode.problem.SplitOdeProblem` as unsplit ``y' = phi + g``.

    Problems built from a combined ``f`` pass it through untouched, so a
    numba-compiled ``f`` keeps the fast path.
    """
    f = problem.f if problem.f is not None else problem.combined()
    return erk_solve(f, problem.y0, problem.t0, problem.tk, problem.h0, tol, tableau, config)


def erk_solve(f, y0, t0, tk, h0, tol, tableau=FEHLBERG45, config=ControllerConfig()):
    """Adaptive integration of ``y' = f(y)`` with an embedded explicit pair.

    Uses the same scaled max-norm error as the additive method (scaled by
    the step's starting state) and accepts a step when it is at most 1.
    When ``f`` is a numba-compiled function the whole loop runs compiled.

    Raises
    ------
    StepSizeUnderflow, MaxStepsExceeded
    """
    y0 = np.array(y0, dtype=float, ndmin=1)
    n = y0.shape[0]
    if not isinstance(tol, ToleranceSpec):
        tol = ToleranceSpec.scalar(tol, n)
    tol = tol.for_size(n)
    h = min(max(h0, config.h_min), config.h_max, tk - t0)
    args = (y0, float(t0), float(tk), float(h), np.array(tableau.A), np.array(tableau.b),
            np.array(tableau.bhat), np.array(tol.atol), np.array(tol.rtol),
            1.0 / (tableau.embedded_order + 1), float(config.safety), float(config.max_growth),
            float(config.h_min), float(config.h_max), float(config.reject_floor),
            int(config.max_steps), bool(config.save_trajectory))
    if _is_jitted(f):
        result = _jitted_loop()(f, *args)
    else:
        def fv(y):
            return np.asarray(f(y), dtype=float)

        with np.errstate(over="ignore", invalid="ignore"):
            result = _erk_loop(fv, *args)
    t, y, n_acc, n_rej, n_f, status, ts, ys = result
    if status == _UNDERFLOW:
        raise StepSizeUnderflow(f"{tableau.name}: step size below h_min={config.h_min:g} at t={t:g}")
    if status == _MAX_STEPS:
        raise MaxStepsExceeded(f"{tableau.name}: more than {config.max_steps} steps at t={t:g}")
    if not config.save_trajectory:
        ts = np.array([float(t0), t])
        ys = np.array([y0, y])
    return IntegrationReport(
        method=tableau.name,
        t_end=float(t),
        y_end=np.array(y),
        ts=np.array(ts),
        ys=np.array(ys),
        n_accepted=int(n_acc),
        n_rejected=int(n_rej),
        n_f=int(n_f),
    )
