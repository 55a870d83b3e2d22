"""Split autonomous ODE problems ``y' = phi(y) + g(y)`` and their runtime systems."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .linalg import JacobianApprox, finite_difference_jacobian

__all__ = [
    "JacobianStrategy",
    "ToleranceSpec",
    "SplitOdeProblem",
    "DirectSplitting",
    "SplittingByMatrix",
    "split_by_matrix",
    "autonomize",
]

_SOURCES = ("analytic_dense", "analytic_diagonal", "fd_dense", "fd_diagonal")


@dataclass(frozen=True)
class JacobianStrategy:
    """Where ``B`` comes from and how long it may be reused.

    ``max_age=None`` re-evaluates ``B`` at the start of every accepted step;
    ``max_age=K`` reuses it for up to ``K`` accepted steps.
    """

    source: str = "analytic_diagonal"
    max_age: int | None = None

    def __post_init__(self):
        if self.source not in _SOURCES:
            raise ValueError(f"source must be one of {_SOURCES}, got {self.source!r}")
        if self.max_age is not None and self.max_age < 1:
            raise ValueError("max_age must be at least 1")

    @property
    def kind(self) -> str:
        return self.source.split("_", 1)[1]

    @property
    def analytic(self) -> bool:
        return self.source.startswith("analytic")

    @classmethod
    def from_cli(cls, name, freeze_age=None):
        """Parse names such as ``analytic-diag`` or ``fd-dense``."""
        source, _, kind = name.partition("-")
        kind = {"diag": "diagonal"}.get(kind, kind)
        return cls(f"{source}_{kind}", freeze_age)


@dataclass(frozen=True)
class ToleranceSpec:
    """Componentwise absolute and relative tolerances."""

    atol: np.ndarray
    rtol: np.ndarray

    def __post_init__(self):
        atol = np.array(self.atol, dtype=float, ndmin=1)
        rtol = np.array(self.rtol, dtype=float, ndmin=1)
        atol, rtol = np.broadcast_arrays(atol, rtol)
        if np.any(atol < 0) or np.any(rtol < 0):
            raise ValueError("tolerances must be non-negative")
        if np.any(atol + rtol <= 0):
            raise ValueError("atol + rtol must be positive in every component")
        atol, rtol = atol.copy(), rtol.copy()
        atol.flags.writeable = False
        rtol.flags.writeable = False
        object.__setattr__(self, "atol", atol)
        object.__setattr__(self, "rtol", rtol)

    @classmethod
    def scalar(cls, tol=None, n=1, *, atol=None, rtol=None):
        """Broadcast scalar tolerances to ``n`` components.

        ``ToleranceSpec.scalar(1e-4, 3)`` sets ``atol = rtol = 1e-4``.
        """
        atol = tol if atol is None else atol
        rtol = tol if rtol is None else rtol
        if atol is None or rtol is None:
            raise ValueError("give tol, or both atol and rtol")
        return cls(np.full(n, float(atol)), np.full(n, float(rtol)))

    def for_size(self, n) -> "ToleranceSpec":
        if self.atol.shape == (n,):
            return self
        if self.atol.shape != (1,):
            raise ValueError(f"tolerances have {self.atol.shape[0]} components, problem has {n}")
        return ToleranceSpec(np.full(n, self.atol[0]), np.full(n, self.rtol[0]))


def _reshape(values, kind):
    if kind == "diagonal" and values.ndim == 2:
        return np.diag(values).copy()
    if kind == "dense" and values.ndim == 1:
        return np.diag(values)
    return values


def _as_vector(fun):
    def wrapped(y):
        return np.asarray(fun(y), dtype=float)

    return wrapped


class DirectSplitting:
    """Runtime system for user-supplied ``phi`` and ``g``.

    ``B`` is the analytic Jacobian of ``g`` (from ``jac``) or a finite
    difference approximation, depending on the strategy.
    """

    fd_counter = "g"

    def __init__(self, phi, g, strategy, jac=None):
        if strategy.analytic and jac is None:
            raise ValueError(f"strategy {strategy.source!r} needs an analytic jac callable")
        self.phi = _as_vector(phi)
        self.g = _as_vector(g)
        self.strategy = strategy
        self.jac = jac

    def refresh(self, y):
        kind = self.strategy.kind
        if self.strategy.analytic:
            values = _reshape(np.asarray(self.jac(y), dtype=float), kind)
            return JacobianApprox(kind, values, evaluated_at=np.array(y, dtype=float))
        return finite_difference_jacobian(self.g, y, kind)


class SplittingByMatrix:
    """Rewrites ``y' = f(y)`` as ``y' = [f(y) - B y] + B y``.

    ``B`` is a snapshot taken by :meth:`refresh` and stays fixed until the
    next refresh, so ``phi(y) + g(y)`` reproduces ``f(y)`` with the same
    ``B`` on both sides, and the Jacobian of ``g`` is exactly ``B``.
    ``B_builder(y)`` may return the diagonal (1-D) or a full matrix (2-D);
    when it is None, ``B`` is a finite difference Jacobian of ``f``.
    """

    # finite difference calls evaluate f, which is booked as a phi evaluation
    fd_counter = "phi"

    def __init__(self, f, B_builder=None, kind=None):
        if B_builder is None and kind is None:
            raise ValueError("kind is required when B is computed by finite differences")
        self.f = _as_vector(f)
        self.B_builder = B_builder
        self.kind = kind
        self.snapshot_B = None

    def refresh(self, y):
        if self.B_builder is None:
            self.snapshot_B = finite_difference_jacobian(self.f, y, self.kind)
            return self.snapshot_B
        values = np.asarray(self.B_builder(y), dtype=float)
        kind = self.kind or ("dense" if values.ndim == 2 else "diagonal")
        self.snapshot_B = JacobianApprox(kind, _reshape(values, kind), evaluated_at=np.array(y, dtype=float))
        return self.snapshot_B

    def _B(self):
        if self.snapshot_B is None:
            raise RuntimeError("refresh() must be called before evaluating phi or g")
        return self.snapshot_B

    def phi(self, y):
        return self.f(y) - self._B().matvec(y)

    def g(self, y):
        return self._B().matvec(y)


def split_by_matrix(f, B_builder=None, kind=None):
    """Build the ``(f - B y) + B y`` splitting of ``f``; see :class:`SplittingByMatrix`."""
    return SplittingByMatrix(f, B_builder, kind)


@dataclass(frozen=True)
class SplitOdeProblem:
    """An autonomous initial value problem with an additively split right-hand side.

    Give either ``phi`` and ``g`` (with ``jac`` for analytic Jacobian
    strategies), or a combined ``f`` to use the ``(f - B y) + B y``
    splitting. In the latter case ``B_builder`` supplies ``B`` for analytic
    strategies, while finite difference strategies differentiate ``f``.
    """

    y0: np.ndarray
    t0: float
    tk: float
    h0: float
    phi: Callable | None = None
    g: Callable | None = None
    jac: Callable | None = None
    f: Callable | None = None
    B_builder: Callable | None = None
    jacobian: JacobianStrategy = field(default_factory=JacobianStrategy)
    name: str = ""

    def __post_init__(self):
        y0 = np.array(self.y0, dtype=float, ndmin=1)
        y0.flags.writeable = False
        object.__setattr__(self, "y0", y0)
        if not self.t0 < self.tk:
            raise ValueError(f"need t0 < tk, got t0={self.t0}, tk={self.tk}")
        if not 0 < self.h0 <= self.tk - self.t0:
            raise ValueError(f"need 0 < h0 <= tk - t0, got h0={self.h0}")
        split = self.phi is not None and self.g is not None
        by_matrix = self.f is not None
        if split == by_matrix:
            raise ValueError("give either phi and g, or f")
        if by_matrix and self.jacobian.analytic and self.B_builder is None:
            raise ValueError(f"strategy {self.jacobian.source!r} needs B_builder")

    @property
    def N(self) -> int:
        return self.y0.shape[0]

    @property
    def split_by_matrix(self) -> bool:
        return self.f is not None

    def combined(self):
        """The unsplit right-hand side ``y -> phi(y) + g(y)``."""
        if self.f is not None:
            return _as_vector(self.f)
        phi, g = _as_vector(self.phi), _as_vector(self.g)
        return lambda y: phi(y) + g(y)

    def make_system(self):
        """Fresh per-integration evaluator holding any mutable ``B`` snapshot."""
        if self.f is not None:
            builder = self.B_builder if self.jacobian.analytic else None
            return SplittingByMatrix(self.f, builder, self.jacobian.kind)
        return DirectSplitting(self.phi, self.g, self.jacobian, self.jac)

    def with_options(self, **changes) -> "SplitOdeProblem":
        values = {name: getattr(self, name) for name in self.__dataclass_fields__}
        values.update(changes)
        return SplitOdeProblem(**values)


def autonomize(phi, g=None):
    """Turn ``phi(t, y)`` (and optionally ``g(t, y)``) into autonomous functions.

    The time is appended as the last state component with derivative 1,
    which goes into the explicit part. Start the augmented problem from
    ``np.append(y0, t0)``.
    """

    def phi_aug(Y):
        Y = np.asarray(Y, dtype=float)
        return np.append(np.asarray(phi(Y[-1], Y[:-1]), dtype=float), 1.0)

    def g_aug(Y):
        Y = np.asarray(Y, dtype=float)
        if g is None:
            return np.zeros_like(Y)
        return np.append(np.asarray(g(Y[-1], Y[:-1]), dtype=float), 0.0)

    return phi_aug, g_aug
