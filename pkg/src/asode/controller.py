"""Adaptive integration with the additive third-order method."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .coeffs import EMBEDDED_COEFFICIENTS, METHOD_COEFFICIENTS
from .exceptions import MaxStepsExceeded, NonFiniteState, SingularD, StepSizeUnderflow
from .linalg import factorize_D
from .problem import ToleranceSpec
from .stepper import DEFAULT_PROBE, StabilityProbeCoefficients, additive_step, stability_estimate

__all__ = [
    "ControllerConfig",
    "IntegrationReport",
    "integrate",
    "integrate_fixed",
    "select_stepsize",
    "rejected_stepsize",
]

logger = logging.getLogger(__name__)

# landing: a remaining distance within this relative margin of h is taken in one step
_LANDING_SLACK = 1e-8


@dataclass(frozen=True)
class ControllerConfig:
    """Step size control settings.

    ``safety`` scales both the accuracy prediction and the shrink factor on
    rejection; ``safety=1`` reproduces the bare prediction rule.
    ``reject_floor`` is the smallest factor by which a rejected step shrinks.
    """

    stability_control: bool = True
    safety: float = 0.9
    max_growth: float = 10.0
    h_min: float = 1e-14
    h_max: float = math.inf
    max_steps: int = 10_000_000
    reject_floor: float = 0.1
    max_singular_retries: int = 50
    save_trajectory: bool = True
    probe: StabilityProbeCoefficients = field(default_factory=lambda: DEFAULT_PROBE)

    def __post_init__(self):
        if not 0 < self.safety <= 1:
            raise ValueError("safety must lie in (0, 1]")
        if not self.max_growth > 1:
            raise ValueError("max_growth must exceed 1")
        if not 0 < self.h_min <= self.h_max:
            raise ValueError("need 0 < h_min <= h_max")
        if not 0 < self.reject_floor < 1:
            raise ValueError("reject_floor must lie in (0, 1)")


@dataclass
class IntegrationReport:
    """Outcome and cost accounting of one integration.

    ``ts`` and ``ys`` hold the initial point and every accepted step when
    trajectories are saved, otherwise only the two end points. ``n_f``
    counts evaluations of an unsplit right-hand side (explicit methods).
    """

    method: str
    t_end: float
    y_end: np.ndarray
    ts: np.ndarray
    ys: np.ndarray
    n_accepted: int = 0
    n_rejected: int = 0
    n_phi: int = 0
    n_g: int = 0
    n_f: int = 0
    n_jac: int = 0
    n_factorizations: int = 0
    n_D_solves: int = 0
    n_stability: int = 0
    h_history: np.ndarray = field(default_factory=lambda: np.empty(0))

    @property
    def n_evals(self) -> int:
        """All right-hand side evaluations: ``n_phi + n_g + n_f``."""
        return self.n_phi + self.n_g + self.n_f

    @property
    def samples(self):
        return list(zip(self.ts, self.ys))

    def stats(self) -> dict[str, int]:
        return {
            "accepted": self.n_accepted,
            "rejected": self.n_rejected,
            "phi_evals": self.n_phi,
            "g_evals": self.n_g,
            "f_evals": self.n_f,
            "jacobians": self.n_jac,
            "factorizations": self.n_factorizations,
            "D_solves": self.n_D_solves,
        }


def select_stepsize(h, err, v=None, config=ControllerConfig()):
    """Next step size after an accepted step.

    ``h_acc = safety * err**(-1/3) * h`` comes from the local error model,
    ``h_st = 2*h/v`` from the stability estimate (if any). The new step is
    ``max(h, min(h_acc, h_st))``, so it never shrinks after an accepted
    step, then capped by ``max_growth*h`` and ``h_max``.
    """
    q_acc = config.max_growth if err <= 0 else err ** (-1.0 / 3.0)
    h_acc = config.safety * q_acc * h
    h_st = math.inf if not v else 2.0 * h / v
    h_new = max(h, min(h_acc, h_st))
    return min(h_new, config.max_growth * h, config.h_max)


def rejected_stepsize(h, err, config=ControllerConfig(), order=3):
    """Shrunk step size after a rejection, never below ``reject_floor * h``."""
    if not math.isfinite(err):
        return config.reject_floor * h
    factor = min(config.safety * err ** (-1.0 / order), 1.0)
    return max(config.reject_floor, factor) * h


def _initial_h(h0, t0, tk, config):
    return min(max(h0, config.h_min), config.h_max, tk - t0)


def _next_h(h_next, t, tk):
    remaining = tk - t
    if remaining <= h_next * (1.0 + _LANDING_SLACK):
        return remaining
    return h_next


def integrate(problem, tol, coeffs=METHOD_COEFFICIENTS, config=ControllerConfig(),
              embedded=EMBEDDED_COEFFICIENTS, h0=None):
    """Integrate ``problem`` from ``t0`` to ``tk`` with adaptive steps.

    A step is accepted when its error estimate is at most 1. ``B`` is
    re-evaluated at the start of a step according to the problem's freeze
    policy, and ``D`` is refactorized whenever ``h`` or ``B`` changes.

    Raises
    ------
    StepSizeUnderflow
        If rejections push ``h`` below ``config.h_min``.
    MaxStepsExceeded
        If more than ``config.max_steps`` steps are attempted.
    SingularD
        If ``D`` stays singular after ``config.max_singular_retries`` halvings.
    """
    if not isinstance(tol, ToleranceSpec):
        tol = ToleranceSpec.scalar(tol, problem.N)
    tol = tol.for_size(problem.N)
    system = problem.make_system()
    max_age = problem.jacobian.max_age
    fd_counter = getattr(system, "fd_counter", "g")

    t0, tk = float(problem.t0), float(problem.tk)
    t, y = t0, np.array(problem.y0, dtype=float)
    h = _initial_h(problem.h0 if h0 is None else h0, t0, tk, config)
    h = _next_h(h, t, tk)

    rep = IntegrationReport("asode3", t0, y, np.empty(0), np.empty((0, problem.N)))
    ts, ys, hs = [t], [y.copy()], []
    B = F = None
    singular_retries = 0
    attempts = 0

    while t < tk:
        attempts += 1
        if attempts > config.max_steps:
            raise MaxStepsExceeded(f"more than {config.max_steps} steps at t={t:g}")
        if B is None:
            B = system.refresh(y)
            rep.n_jac += 1
            if fd_counter == "phi":
                rep.n_phi += B.n_evals
            else:
                rep.n_g += B.n_evals
            F = None
        if F is None or F.h_used != h:
            try:
                F = factorize_D(B, coeffs.a, h)
            except SingularD:
                singular_retries += 1
                if singular_retries > config.max_singular_retries:
                    raise
                F = None
                h = _shrink(0.5 * h, config, t)
                continue
            rep.n_factorizations += 1

        landing = h >= tk - t
        try:
            out = additive_step(y, h, F, system, coeffs, embedded, tol)
        except NonFiniteState:
            # the stage work was still done
            rep.n_phi += 3
            rep.n_g += 2
            rep.n_D_solves += 3
            rep.n_rejected += 1
            h = _shrink(0.5 * h, config, t)
            continue
        rep.n_phi += out.evals.phi
        rep.n_g += out.evals.g
        rep.n_D_solves += out.evals.D_solves
        singular_retries = 0

        if out.err <= 1.0:
            v = None
            if config.stability_control:
                v = stability_estimate(y, out.k1, h, system.phi, config.probe, floor=float(np.min(tol.atol)))
                rep.n_phi += 2
                rep.n_stability += 1
            rep.n_accepted += 1
            hs.append(h)
            h_next = select_stepsize(h, out.err, v, config)
            t = tk if landing else t + h
            y = out.y_next
            if config.save_trajectory:
                ts.append(t)
                ys.append(y)
            B = B.aged()
            if max_age is None or B.age >= max_age:
                B = None
            if t < tk:
                h = _next_h(h_next, t, tk)
        else:
            rep.n_rejected += 1
            h = _shrink(rejected_stepsize(h, out.err, config), config, t)

    if not config.save_trajectory:
        ts.append(t)
        ys.append(y)
    rep.t_end = t
    rep.y_end = y
    rep.ts = np.array(ts)
    rep.ys = np.array(ys)
    rep.h_history = np.array(hs)
    logger.debug("asode3 finished: %s", rep.stats())
    return rep


def _shrink(h, config, t):
    if h < config.h_min:
        raise StepSizeUnderflow(f"step size {h:g} below h_min={config.h_min:g} at t={t:g}")
    return h


def integrate_fixed(problem, n_steps, coeffs=METHOD_COEFFICIENTS, embedded=EMBEDDED_COEFFICIENTS):
    """Take ``n_steps`` equal steps over the problem interval, without error control.

    ``B`` is refreshed every step. Returns the final state and the largest
    embedded difference ``|y_next - y_embedded|`` seen along the way.
    """
    system = problem.make_system()
    t0, tk = float(problem.t0), float(problem.tk)
    h = (tk - t0) / n_steps
    y = np.array(problem.y0, dtype=float)
    max_defect = 0.0
    for _ in range(n_steps):
        B = system.refresh(y)
        F = factorize_D(B, coeffs.a, h)
        out = additive_step(y, h, F, system, coeffs, embedded)
        max_defect = max(max_defect, float(np.max(np.abs(out.y_next - out.y_next_embedded))))
        y = out.y_next
    return y, max_defect
