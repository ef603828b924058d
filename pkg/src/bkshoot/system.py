"""Reduced field equations for static, spherically symmetric SU(2) Einstein-Yang/Mills.

Metric ansatz ``ds^2 = -T^-2 dt^2 + A^-1 dr^2 + r^2 dOmega^2`` with the gauge
connection parameterized by a single radial function ``w(r)``.  The pair
``(w, A)`` obeys a closed second/first order system; ``T`` decouples and is
recovered afterwards (see :mod:`bkshoot.metric`).

The Yang-Mills equation is

    r^2 A w'' + Phi w' + w (1 - w^2) = 0,    Phi = r (1 - A) - (1 - w^2)^2 / r

and the radial metric coefficient satisfies

    r A' + (1 + 2 w'^2) A = 1 - (1 - w^2)^2 / r^2.

Note the ``(1 + 2 w'^2) A`` grouping on the left: it is the form consistent
with ``A(0) = 1, w(0) = 1`` at the regular origin and with the mass identity
``m' = A w'^2 + (1 - w^2)^2 / (2 r^2)`` for ``A = 1 - 2m/r``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass


class DomainError(ValueError):
    """Raised when a state lies outside the domain of an operation."""


@dataclass(frozen=True)
class FieldState:
    """One point of the reduced system."""

    r: float
    w: float
    wp: float
    A: float

    def as_tuple(self) -> tuple[float, float, float]:
        return (self.w, self.wp, self.A)


@dataclass(frozen=True)
class DerivativeState:
    dw: float
    dwp: float
    dA: float

    def as_tuple(self) -> tuple[float, float, float]:
        return (self.dw, self.dwp, self.dA)


def _check_radius(r: float) -> None:
    if not r > 0.0:
        raise DomainError(f"radius must be positive, got r={r!r}")


def check_lambda(lam: float) -> float:
    """Validate a shooting parameter ``lambda = -w''(0)``."""
    lam = float(lam)
    if not (math.isfinite(lam) and lam >= 0.0):
        raise DomainError(f"shooting parameter must be finite and >= 0, got {lam!r}")
    return lam


def phi(s: FieldState) -> float:
    _check_radius(s.r)
    u = 1.0 - s.w * s.w
    return s.r * (1.0 - s.A) - u * u / s.r


def rhs_tuple(r: float, w: float, wp: float, A: float) -> tuple[float, float, float]:
    """Unchecked right-hand side on plain floats; hot path of the integrator.

    Raises ``ZeroDivisionError`` when ``A == 0`` or ``r == 0``.
    """
    u = 1.0 - w * w
    ph = r * (1.0 - A) - u * u / r
    return (
        wp,
        -(ph * wp + w * u) / (r * r * A),
        (1.0 - u * u / (r * r) - (1.0 + 2.0 * wp * wp) * A) / r,
    )


def field_rhs(s: FieldState) -> DerivativeState:
    """Derivatives ``(w', w'', A')`` at a state with ``r > 0`` and ``A != 0``."""
    _check_radius(s.r)
    if s.A == 0.0:
        raise DomainError(f"A vanishes at r={s.r!r}; the system is singular there")
    d = DerivativeState(*rhs_tuple(s.r, s.w, s.wp, s.A))
    if not all(math.isfinite(x) for x in d.as_tuple()):
        raise DomainError(f"non-finite derivative {d} at {s}")
    return d


def residual_w(r: float, w: float, wp: float, wpp: float, A: float) -> float:
    """Residual of the Yang-Mills equation; zero iff the sample satisfies it."""
    _check_radius(r)
    u = 1.0 - w * w
    ph = r * (1.0 - A) - u * u / r
    return r * r * A * wpp + ph * wp + w * u


def residual_A(r: float, w: float, wp: float, A: float, Ap: float) -> float:
    """Residual of the first-order equation for the radial metric coefficient."""
    _check_radius(r)
    u = 1.0 - w * w
    return r * Ap + (1.0 + 2.0 * wp * wp) * A - 1.0 + u * u / (r * r)


def rn_solution(c: float, r: float) -> FieldState:
    """Exact solution ``w = 0, A = 1 + 1/r^2 - c/r`` (Reissner-Nordstrom form)."""
    _check_radius(r)
    return FieldState(r=r, w=0.0, wp=0.0, A=1.0 + 1.0 / (r * r) - c / r)


def rn_A_prime(c: float, r: float) -> float:
    _check_radius(r)
    return -2.0 / r**3 + c / (r * r)


def f_norm_sq(s: FieldState) -> float:
    """Yang-Mills field strength squared, ``2 w'^2/r^2 + (1-w^2)^2/r^4``.

    This is the unweighted form.  :func:`f_norm_sq_weighted` carries the
    ``g^rr = A`` factor on the radial term; neither is singled out as the
    energy density.
    """
    _check_radius(s.r)
    u = 1.0 - s.w * s.w
    return 2.0 * s.wp * s.wp / s.r**2 + u * u / s.r**4


def f_norm_sq_weighted(s: FieldState) -> float:
    _check_radius(s.r)
    u = 1.0 - s.w * s.w
    return 2.0 * s.A * s.wp * s.wp / s.r**2 + u * u / s.r**4


def v_diag(s: FieldState) -> float:
    """``A w'``, which stays bounded where ``w'`` grows as ``A`` goes to zero."""
    return s.A * s.wp
