"""Jacobian approximations and the linear solves with ``D = I - a*h*B``."""

from __future__ import annotations

from dataclasses import dataclass

import warnings

import numpy as np
import scipy.linalg

from .exceptions import SingularD

__all__ = [
    "JacobianApprox",
    "FactorizedD",
    "factorize_D",
    "solve_D",
    "finite_difference_jacobian",
    "PIVOT_TOL",
]

PIVOT_TOL = 1e-14

_KINDS = ("dense", "diagonal")


@dataclass(frozen=True)
class JacobianApprox:
    """An approximation ``B`` of the Jacobian of the stiff term.

    ``values`` is an ``(N, N)`` array for ``kind="dense"`` and an ``(N,)``
    array holding the diagonal for ``kind="diagonal"``. ``age`` counts the
    accepted steps since ``values`` was evaluated and ``n_evals`` records how
    many right-hand-side evaluations it cost (zero for analytic Jacobians).
    """

    kind: str
    values: np.ndarray
    evaluated_at: np.ndarray | None = None
    age: int = 0
    n_evals: int = 0

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise ValueError(f"kind must be one of {_KINDS}, got {self.kind!r}")
        values = np.array(self.values, dtype=float)
        if self.kind == "dense":
            if values.ndim != 2 or values.shape[0] != values.shape[1]:
                raise ValueError(f"dense Jacobian must be square, got shape {values.shape}")
        elif values.ndim != 1:
            raise ValueError(f"diagonal Jacobian must be 1-D, got shape {values.shape}")
        if self.age < 0:
            raise ValueError("age must be non-negative")
        values.flags.writeable = False
        object.__setattr__(self, "values", values)

    @property
    def n(self) -> int:
        return self.values.shape[0]

    def matvec(self, y):
        if self.kind == "dense":
            return self.values @ y
        return self.values * y

    def to_dense(self) -> np.ndarray:
        if self.kind == "dense":
            return np.array(self.values)
        return np.diag(self.values)

    def aged(self) -> "JacobianApprox":
        return JacobianApprox(self.kind, self.values, self.evaluated_at, self.age + 1, self.n_evals)

    @classmethod
    def zeros(cls, n, kind="diagonal"):
        shape = (n, n) if kind == "dense" else (n,)
        return cls(kind, np.zeros(shape))


@dataclass(frozen=True)
class FactorizedD:
    """Factorization of ``I - a_used*h_used*B``, reusable for any number of solves.

    For dense ``B`` the payload is the ``(lu, piv)`` pair of a row-pivoted LU
    factorization; for diagonal ``B`` it is the reciprocal of the diagonal.
    """

    kind: str
    payload: object
    h_used: float
    a_used: float

    @property
    def n(self) -> int:
        if self.kind == "dense":
            return self.payload[0].shape[0]
        return self.payload.shape[0]


def factorize_D(B, a, h):
    """Factorize ``D = I - a*h*B``.

    Raises
    ------
    SingularD
        If a pivot of the LU factorization (dense) or an entry ``1 - a*h*b_ii``
        (diagonal) is smaller than ``PIVOT_TOL`` in magnitude.
    """
    if not h > 0:
        raise ValueError(f"step size must be positive, got {h}")
    ah = a * h
    if B.kind == "diagonal":
        diag = 1.0 - ah * B.values
        if np.any(np.abs(diag) < PIVOT_TOL) or not np.all(np.isfinite(diag)):
            raise SingularD(f"D has a (near) zero diagonal entry for h={h:g}")
        return FactorizedD("diagonal", 1.0 / diag, float(h), float(a))

    D = np.eye(B.n) - ah * B.values
    if not np.all(np.isfinite(D)):
        raise SingularD(f"D is not finite for h={h:g}")
    with warnings.catch_warnings():
        # exact zero pivots are reported below as SingularD
        warnings.simplefilter("ignore", scipy.linalg.LinAlgWarning)
        lu, piv = scipy.linalg.lu_factor(D, check_finite=False)
    if np.any(np.abs(np.diag(lu)) < PIVOT_TOL):
        raise SingularD(f"D has a (near) zero pivot for h={h:g}")
    return FactorizedD("dense", (lu, piv), float(h), float(a))


def solve_D(F, rhs):
    """Solve ``D x = rhs`` with a factorization from :func:`factorize_D`."""
    rhs = np.asarray(rhs, dtype=float)
    if rhs.shape != (F.n,):
        raise ValueError(f"rhs must have shape ({F.n},), got {rhs.shape}")
    if F.kind == "diagonal":
        return F.payload * rhs
    return scipy.linalg.lu_solve(F.payload, rhs, check_finite=False)


def finite_difference_jacobian(g, y, kind="dense", g0=None):
    """Forward-difference approximation of the Jacobian of ``g`` at ``y``.

    The increment for component ``i`` is ``sqrt(eps) * max(|y_i|, 1e-5)``.
    ``g0 = g(y)`` may be passed in to avoid one evaluation; the number of
    calls actually made is stored in the result's ``n_evals``.
    """
    y = np.asarray(y, dtype=float)
    n = y.shape[0]
    n_evals = 0
    if g0 is None:
        g0 = np.asarray(g(y), dtype=float)
        n_evals += 1
    delta = np.sqrt(np.finfo(float).eps) * np.maximum(np.abs(y), 1e-5)
    if kind == "dense":
        J = np.empty((n, n))
    elif kind == "diagonal":
        J = np.empty(n)
    else:
        raise ValueError(f"kind must be one of {_KINDS}, got {kind!r}")
    for j in range(n):
        yp = y.copy()
        yp[j] += delta[j]
        # the actual step, which may differ from delta[j] by rounding
        dj = yp[j] - y[j]
        gj = np.asarray(g(yp), dtype=float)
        n_evals += 1
        if kind == "dense":
            J[:, j] = (gj - g0) / dj
        else:
            J[j] = (gj[j] - g0[j]) / dj
    return JacobianApprox(kind, J, evaluated_at=y.copy(), n_evals=n_evals)
