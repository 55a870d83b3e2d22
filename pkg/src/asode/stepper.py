"""One step of the additive method, its embedded error estimate and the stability probe."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .coeffs import EMBEDDED_COEFFICIENTS, METHOD_COEFFICIENTS
from .exceptions import NonFiniteState
from .linalg import JacobianApprox, factorize_D, solve_D

__all__ = [
    "StepEvals",
    "StepOutcome",
    "StabilityProbeCoefficients",
    "DEFAULT_PROBE",
    "additive_step",
    "error_norm",
    "stability_estimate",
    "stability_function",
]


@dataclass(frozen=True)
class StepEvals:
    phi: int = 0
    g: int = 0
    D_solves: int = 0


@dataclass(frozen=True)
class StepOutcome:
    """Result of one attempted step.

    ``err`` is nan unless tolerances were passed to :func:`additive_step`;
    ``v`` is only set once the stability probe has been run. ``k1`` is
    kept so the probe can reuse it.
    """

    y_next: np.ndarray
    y_next_embedded: np.ndarray
    err: float
    evals: StepEvals
    k1: np.ndarray
    v: float | None = None


@dataclass(frozen=True)
class StabilityProbeCoefficients:
    """Offsets of the two extra explicit stages used to estimate ``h*|lambda_max|``.

    Any values with ``alpha21 == alpha31 + alpha32`` and ``alpha32 != 0``
    give the exact answer for linear ``phi``.
    """

    alpha21: float = 0.5
    alpha31: float = 0.25
    alpha32: float = 0.25

    def __post_init__(self):
        if self.alpha32 == 0:
            raise ValueError("alpha32 must be nonzero")
        if self.alpha21 != self.alpha31 + self.alpha32:
            raise ValueError("need alpha21 == alpha31 + alpha32")


DEFAULT_PROBE = StabilityProbeCoefficients()


def additive_step(y, h, F, system, coeffs=METHOD_COEFFICIENTS, embedded=EMBEDDED_COEFFICIENTS, tol=None):
    """Advance ``y`` by one step of size ``h``.

    ``F`` must be the factorization of ``I - a*h*B`` for the same ``h`` and
    the ``B`` currently held by ``system`` (an object with ``phi`` and ``g``
    methods). ``phi(y)`` is evaluated once and shared by ``k1`` and the
    right-hand side of ``k2``, so a step costs three ``phi`` and two ``g``
    evaluations plus three solves. The embedded second-order solution uses
    only ``k1``, ``k2``, ``k3`` and the ``phi`` part of ``k4``.

    Raises
    ------
    NonFiniteState
        If the new solution or its embedded companion is not finite.
    """
    y = np.asarray(y, dtype=float)
    gamma = coeffs.gamma
    p1, p2, p3, p4, p5, p6 = coeffs.p
    _, a42, a43 = coeffs.alpha4
    b43 = coeffs.beta4[2]
    _, b62, b63, b64, b65 = coeffs.beta6
    r1, r2, r3, r4, _, _ = embedded.r
    phi, g = system.phi, system.g

    with np.errstate(over="ignore", invalid="ignore"):
        phi_y = phi(y)
        k1 = h * phi_y
        k2 = solve_D(F, h * (phi_y + g(y)))
        k3 = solve_D(F, k2)
        k4_phi = h * phi(y + b43 * k3)
        k4 = k4_phi + h * g(y + a42 * k2 + a43 * k3)
        k5 = solve_D(F, k4 + gamma * k3)
        k6 = h * phi(y + b62 * k2 + b63 * k3 + b64 * k4 + b65 * k5)
        y_next = y + (p1 * k1 + p2 * k2 + p3 * k3 + p4 * k4 + p5 * k5 + p6 * k6)
        y_emb = y + (r1 * k1 + r2 * k2 + r3 * k3 + r4 * k4_phi)

    if not (np.all(np.isfinite(y_next)) and np.all(np.isfinite(y_emb))):
        raise NonFiniteState(f"non-finite stage values for h={h:g}")
    err = float("nan") if tol is None else error_norm(y_next, y_emb, y, tol)
    return StepOutcome(y_next, y_emb, err, StepEvals(phi=3, g=2, D_solves=3), k1)


def error_norm(y_next, y_next_embedded, y_scale, tol):
    """Scaled max-norm ``max_i |y_i - y2_i| / (atol_i + rtol_i*|s_i|)``.

    The step's starting state is used as the scale ``s``.
    """
    diff = np.abs(np.asarray(y_next) - np.asarray(y_next_embedded))
    scale = tol.atol + tol.rtol * np.abs(y_scale)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(diff == 0.0, 0.0, diff / scale)
    return float(np.max(ratio)) if ratio.size else 0.0


def stability_estimate(y, k1, h, phi, probe=DEFAULT_PROBE, floor=None):
    """Power-method estimate of ``h*|lambda_max|`` for the explicit part.

    Two extra evaluations of ``phi``::

        d1 = h*phi(y + alpha21*k1)
        d2 = h*phi(y + alpha31*k1 + alpha32*d1)
        v  = max_i |d2_i - d1_i| / |d1_i - k1_i| / |alpha32|

    Components whose denominator is at rounding level are skipped; if none
    remains the estimate is 0, i.e. no stability restriction.
    """
    if floor is None:
        floor = np.finfo(float).tiny
    d1 = h * np.asarray(phi(y + probe.alpha21 * k1), dtype=float)
    d2 = h * np.asarray(phi(y + probe.alpha31 * k1 + probe.alpha32 * d1), dtype=float)
    num = np.abs(d2 - d1)
    den = np.abs(d1 - k1)
    eps = np.finfo(float).eps
    ok = den > 10.0 * eps * (np.abs(d1) + np.abs(k1) + floor)
    if not np.any(ok):
        return 0.0
    v = np.max(num[ok] / den[ok]) / abs(probe.alpha32)
    return float(v) if np.isfinite(v) else float("inf")


class _ScalarModel:
    def __init__(self, lam_phi, lam_g):
        self.lam_phi = lam_phi
        self.lam_g = lam_g

    def phi(self, y):
        return self.lam_phi * y

    def g(self, y):
        return self.lam_g * y


def stability_function(x, z, coeffs=METHOD_COEFFICIENTS, embedded=EMBEDDED_COEFFICIENTS):
    """Amplification factor ``R(x, z)`` of one step on ``y' = lambda1*y + lambda2*y``.

    ``x = lambda1*h`` drives the explicit part and ``z = lambda2*h`` the
    implicit part, with ``B`` equal to the exact ``lambda2``. Evaluated by
    running the stage recursion from ``y = 1`` with ``h = 1``.
    """
    B = JacobianApprox("diagonal", np.array([float(z)]))
    F = factorize_D(B, coeffs.a, 1.0)
    out = additive_step(np.ones(1), 1.0, F, _ScalarModel(float(x), float(z)), coeffs, embedded)
    return float(out.y_next[0])
