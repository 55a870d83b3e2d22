"""Coefficients of the six-stage additive method and its embedded companion.

The method advances ``y' = phi(y) + g(y)`` with three explicit evaluations of
``phi``, two of ``g`` and three solves with ``D = I - a*h*B``::

    k1 = h*phi(y)
    D k2 = h*(phi(y) + g(y))
    D k3 = k2
    k4 = h*phi(y + b43*k3) + h*g(y + a42*k2 + a43*k3)
    D k5 = k4 + gamma*k3
    k6 = h*phi(y + b62*k2 + b63*k3 + b64*k4 + b65*k5)
    y_new = y + sum(p_i * k_i)

The free parameters ``a`` and ``gamma`` are roots of two cubics; everything
else follows in closed form. :data:`METHOD_COEFFICIENTS` stores the published
14-digit values, and :func:`derive_coefficients` recomputes them.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .exceptions import RootSelectionError

__all__ = [
    "MethodCoefficients",
    "EmbeddedCoefficients",
    "DerivationTrace",
    "METHOD_COEFFICIENTS",
    "EMBEDDED_COEFFICIENTS",
    "A_ROOTS",
    "GAMMA_ROOTS",
    "real_cubic_roots",
    "a_cubic",
    "gamma_cubic",
    "derive_coefficients",
    "order3_residuals",
    "structural_residuals",
    "embedded_residuals",
]


@dataclass(frozen=True)
class MethodCoefficients:
    """Parameters of the third-order scheme.

    ``p`` holds p1..p6, ``alpha4`` holds alpha41..alpha43, ``beta4`` holds
    beta41..beta43 and ``beta6`` holds beta61..beta65.
    """

    a: float
    gamma: float
    p: tuple[float, ...]
    alpha4: tuple[float, float, float]
    beta4: tuple[float, float, float]
    beta6: tuple[float, float, float, float, float]

    def __post_init__(self):
        for name, n in (("p", 6), ("alpha4", 3), ("beta4", 3), ("beta6", 5)):
            value = tuple(float(v) for v in getattr(self, name))
            if len(value) != n:
                raise ValueError(f"{name} must have {n} entries, got {len(value)}")
            object.__setattr__(self, name, value)
        object.__setattr__(self, "a", float(self.a))
        object.__setattr__(self, "gamma", float(self.gamma))

    @property
    def u(self) -> float:
        return self.a * (self.gamma - 1.0) + 1.0

    def replace(self, **changes) -> "MethodCoefficients":
        """Return a copy with individual entries overridden.

        Besides the field names, single entries can be given as ``p5=...``,
        ``alpha43=...``, ``beta65=...`` (1-based, as in the usual notation).
        """
        fields = {
            "a": self.a,
            "gamma": self.gamma,
            "p": list(self.p),
            "alpha4": list(self.alpha4),
            "beta4": list(self.beta4),
            "beta6": list(self.beta6),
        }
        for key, value in changes.items():
            if key in fields:
                fields[key] = value
                continue
            for prefix, target in (("alpha4", "alpha4"), ("beta4", "beta4"),
                                   ("beta6", "beta6"), ("p", "p")):
                index = key[len(prefix):]
                if key.startswith(prefix) and index.isdigit():
                    fields[target][int(index) - 1] = value
                    break
            else:
                raise KeyError(key)
        return MethodCoefficients(**fields)

    def as_dict(self) -> dict[str, float]:
        out = {"a": self.a, "gamma": self.gamma}
        out.update({f"p{i + 1}": v for i, v in enumerate(self.p)})
        out.update({f"alpha4{i + 1}": v for i, v in enumerate(self.alpha4)})
        out.update({f"beta4{i + 1}": v for i, v in enumerate(self.beta4)})
        out.update({f"beta6{i + 1}": v for i, v in enumerate(self.beta6)})
        return out


@dataclass(frozen=True)
class EmbeddedCoefficients:
    """Weights r1..r6 of the second-order embedded solution."""

    r: tuple[float, ...]

    def __post_init__(self):
        r = tuple(float(v) for v in self.r)
        if len(r) != 6:
            raise ValueError(f"r must have 6 entries, got {len(r)}")
        object.__setattr__(self, "r", r)

    def as_dict(self) -> dict[str, float]:
        return {f"r{i + 1}": v for i, v in enumerate(self.r)}


@dataclass(frozen=True)
class DerivationTrace:
    """Intermediate quantities of :func:`derive_coefficients`.

    ``beta2_alt`` and ``beta3_alt`` are the alternative expressions
    ``1/(2 p6) - 1/(18 a p5 p6)`` and ``1/(6 p6) - 1/(9 p5 p6)``; they
    must agree with ``beta2`` and ``beta3`` up to rounding.
    """

    cubic_a_roots: tuple[float, float, float]
    cubic_gamma_roots: tuple[float, float, float]
    beta1: float
    beta2: float
    beta3: float
    beta2_alt: float
    beta3_alt: float


# Published 14-digit values; these are what the integrators use by default.
METHOD_COEFFICIENTS = MethodCoefficients(
    a=0.43586652150846,
    gamma=-4.51745281449727,
    p=(0.09130146290929, 0.49588787677190, 0.75521774748189,
       0.20395977226114, 0.12937356107220, -0.09130146290929),
    alpha4=(0.0, 0.43586652150846, 0.56413347849154),
    beta4=(0.0, 0.0, 2.95562753995095),
    beta6=(0.0, 0.43586652150846, -3.98487214709651,
           1.48112677684356, -2.09874671679705),
)

EMBEDDED_COEFFICIENTS = EmbeddedCoefficients(
    r=(-0.16916881211910, 0.85285981986048, 0.14714018013952,
       0.16916881211910, 0.0, 0.0),
)

A_ROOTS = (0.15898389998867, 0.43586652150845, 2.40514957850286)
GAMMA_ROOTS = (-4.51745281449726, -2.49646456973997, -1.02332630944762)

_SELECTION_TOL = 1e-9


def _polish(coefs, x):
    """One Newton step on ``sum(coefs[i] * x**(3-i))``; kept only if it helps."""
    c3, c2, c1, c0 = coefs
    fx = ((c3 * x + c2) * x + c1) * x + c0
    dfx = (3.0 * c3 * x + 2.0 * c2) * x + c1
    if dfx == 0.0:
        return x
    x_new = x - fx / dfx
    f_new = ((c3 * x_new + c2) * x_new + c1) * x_new + c0
    return x_new if abs(f_new) <= abs(fx) else x


def real_cubic_roots(c3, c2, c1, c0, return_multiplicity=False):
    """Real roots of ``c3*x**3 + c2*x**2 + c1*x + c0`` in ascending order.

    Uses the trigonometric form when there are three distinct real roots and
    Cardano's formula when there is one, followed by a single Newton step per
    simple root. Repeated roots are listed once; pass
    ``return_multiplicity=True`` to also get their multiplicities.

    Examples
    --------
    >>> [round(x, 12) for x in real_cubic_roots(1.0, -6.0, 11.0, -6.0)]
    [1.0, 2.0, 3.0]
    >>> real_cubic_roots(1.0, 0.0, 0.0, 0.0, return_multiplicity=True)
    ([0.0], [3])
    """
    if c3 == 0:
        raise ValueError("leading coefficient must be nonzero")
    coefs = (float(c3), float(c2), float(c1), float(c0))
    b, c, d = coefs[1] / coefs[0], coefs[2] / coefs[0], coefs[3] / coefs[0]
    shift = -b / 3.0
    # depressed cubic t**3 + p*t + q with x = t + shift
    p = c - b * b / 3.0
    q = 2.0 * b ** 3 / 27.0 - b * c / 3.0 + d

    scale = max(1.0, abs(b), abs(c), abs(d))
    eps = np.finfo(float).eps
    if abs(p) <= 8 * eps * scale ** 2 and abs(q) <= 8 * eps * scale ** 3:
        roots, mult = [shift], [3]
    else:
        half_q = q / 2.0
        third_p = p / 3.0
        disc = half_q * half_q + third_p ** 3
        disc_scale = half_q * half_q + abs(third_p) ** 3
        if abs(disc) <= 64 * eps * disc_scale:
            # one simple and one double root
            simple = 3.0 * q / p
            double = -1.5 * q / p
            roots, mult = [simple + shift, double + shift], [1, 2]
        elif disc < 0.0:
            m = 2.0 * math.sqrt(-third_p)
            arg = 3.0 * q / (p * m)
            theta = math.acos(min(1.0, max(-1.0, arg))) / 3.0
            roots = [m * math.cos(theta - 2.0 * math.pi * k / 3.0) + shift for k in range(3)]
            mult = [1, 1, 1]
        else:
            s = math.sqrt(disc)
            t = np.cbrt(-half_q + s) + np.cbrt(-half_q - s)
            roots, mult = [float(t) + shift], [1]
        roots = [_polish(coefs, x) if m == 1 else x for x, m in zip(roots, mult)]

    order = np.argsort(roots, kind="stable")
    roots = [float(roots[i]) + 0.0 for i in order]
    mult = [mult[i] for i in order]
    if return_multiplicity:
        return roots, mult
    return roots


def a_cubic():
    """Coefficients (highest degree first) of the cubic fixing ``a``."""
    return (6.0, -18.0, 9.0, -1.0)


def gamma_cubic(a):
    """Coefficients (highest degree first) of the cubic fixing ``gamma`` for a given ``a``."""
    return (
        4.0 * a ** 3,
        -12.0 * a * (15.0 * a * a - 10.0 * a + 1.0),
        3.0 * a * (374.0 * a * a - 228.0 * a + 33.0),
        4.0 * (813.0 * a * a - 486.0 * a + 175.0 / 3.0),
    )


def _three_roots(coefs, what):
    roots, mult = real_cubic_roots(*coefs, return_multiplicity=True)
    if mult != [1, 1, 1]:
        raise RootSelectionError(f"cubic for {what} does not have three distinct real roots: {roots}")
    return tuple(roots)


def derive_coefficients():
    """Recompute all method and embedded coefficients from scratch.

    Picks the middle root of the ``a`` cubic and the most negative root of the
    ``gamma`` cubic, then applies the closed-form expressions.

    Returns
    -------
    (MethodCoefficients, EmbeddedCoefficients, DerivationTrace)
    """
    a_roots = _three_roots(a_cubic(), "a")
    a = a_roots[1]
    gamma_roots = _three_roots(gamma_cubic(a), "gamma")
    gamma = gamma_roots[0]
    if abs(a - A_ROOTS[1]) > _SELECTION_TOL or abs(gamma - GAMMA_ROOTS[0]) > _SELECTION_TOL:
        raise RootSelectionError(f"selected roots a={a!r}, gamma={gamma!r} differ from the published values")

    u = a * (gamma - 1.0) + 1.0
    p1 = -(1.0 - 2.0 * a) / u
    p2 = (2.0 * a * a * (7.0 * gamma - 1.0) - a * (7.0 * gamma - 3.0) + gamma) / (6.0 * a * u)
    p3 = (-2.0 * a * a * (8.0 * gamma + 1.0) + a * (13.0 * gamma + 1.0) - 2.0 * gamma) / (6.0 * a * u)
    p4 = (-6.0 * a * a + 2.0 * a * (gamma + 5.0) - 1.0) / (6.0 * u)
    p5 = 0.5 * (2.0 * a * a - 4.0 * a + 1.0) / u
    p6 = (1.0 - 2.0 * a) / u
    b43 = 1.0 / (6.0 * a * p5)
    beta1 = a * p5 / p6
    beta2 = 2.0 * (1.0 - b43 * b43) / (3.0 - 2.0 * b43)
    b64 = a * a / (1.0 - 2.0 * a)
    b65 = beta1 - b64
    b63 = beta2 - a - b64 - (gamma + 1.0) * b65
    b62 = a
    beta3 = a * (b62 + 2.0 * b63 + (3.0 * gamma + 1.0) * b65) + b64 + b65

    coeffs = MethodCoefficients(
        a=a,
        gamma=gamma,
        p=(p1, p2, p3, p4, p5, p6),
        alpha4=(0.0, a, 1.0 - a),
        beta4=(0.0, 0.0, b43),
        beta6=(0.0, b62, b63, b64, b65),
    )
    embedded = EmbeddedCoefficients(
        r=(-0.5 / b43, 0.5 * (4.0 * a - 1.0) / a, 0.5 * (1.0 - 2.0 * a) / a, 0.5 / b43, 0.0, 0.0)
    )
    trace = DerivationTrace(
        cubic_a_roots=a_roots,
        cubic_gamma_roots=gamma_roots,
        beta1=beta1,
        beta2=beta2,
        beta3=beta3,
        beta2_alt=1.0 / (2.0 * p6) - 1.0 / (18.0 * a * p5 * p6),
        beta3_alt=1.0 / (6.0 * p6) - 1.0 / (9.0 * p5 * p6),
    )
    return coeffs, embedded, trace


def order3_residuals(c):
    """Left minus right side of the ten reduced third-order/L-stability equations.

    The fixed-value identities (``alpha41 = 0``, ``p1 = -p6`` ...) are checked
    separately by :func:`structural_residuals`.
    """
    a, gam = c.a, c.gamma
    _, p2, p3, p4, p5, p6 = c.p
    b43 = c.beta4[2]
    _, b62, b63, b64, b65 = c.beta6
    inner6 = b62 + b63 + b64 + (gam + 1.0) * b65
    res = [
        p2 + p3 + p4 + (gam + 1.0) * p5 - 1.0,
        a * b43 * p5 - 1.0 / 6.0,
        b43 * (b64 + b65) * p6 - 1.0 / 6.0,
        b43 * (p4 + p5) + inner6 * p6 - 0.5,
        b43 ** 2 * (p4 + p5) + inner6 ** 2 * p6 - 1.0 / 3.0,
        2.0 * a * b43 * (p4 + p5)
        + (a * (b62 + 2.0 * b63 + (3.0 * gam + 1.0) * b65) + b64 + b65) * p6 - 1.0 / 6.0,
        p4 + p5 - 1.0 / 3.0,
        a * p2 + 2.0 * a * p3 + p4 + (a * (3.0 * gam + 1.0) + 1.0) * p5 - 0.5,
        a * (a * p2 + 3.0 * a * p3 + (2.0 - a) * p4 + 3.0 * (2.0 * a * gam + 1.0) * p5) - 1.0 / 6.0,
        a * a - a * p2 + (1.0 - 2.0 * a) * p4,
    ]
    return np.array(res)


def structural_residuals(c):
    """Residuals of the fixed-value identities accompanying the reduced system.

    Order: alpha41, beta41, beta42, beta61, alpha42 - a, beta62 - a,
    alpha43 - (1 - a), beta64 - a**2/(1 - 2a), p1 + p6.
    """
    a = c.a
    return np.array([
        c.alpha4[0],
        c.beta4[0],
        c.beta4[1],
        c.beta6[0],
        c.alpha4[1] - a,
        c.beta6[1] - a,
        c.alpha4[2] - (1.0 - a),
        c.beta6[3] - a * a / (1.0 - 2.0 * a),
        c.p[0] + c.p[5],
    ])


def embedded_residuals(c, e):
    """Residuals of the six second-order conditions of the embedded solution."""
    a, gam = c.a, c.gamma
    r1, r2, r3, r4, r5, r6 = e.r
    b41, b42, b43 = c.beta4
    b61, b62, b63, b64, b65 = c.beta6
    return np.array([
        r1 + r2 + r3 + r4 + (gam + 1.0) * r5 + r6 - 1.0,
        r2 + r3 + gam * r5 - 1.0,
        a * (r2 + 2.0 * r3 + (3.0 * gam + 1.0) * r5) - 0.5,
        a * (r2 + 2.0 * r3 + 3.0 * gam * r5) - 0.5,
        (b41 + b42 + b43) * (r4 + r5) + (b61 + b62 + b63 + b64 + (gam + 1.0) * b65) * r6 - 0.5,
        (b42 + b43) * (r4 + r5) + (b62 + b63 + gam * b65) * r6 - 0.5,
    ])
