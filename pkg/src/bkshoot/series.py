"""Ignition data near the regular origin.

The system is singular at ``r = 0``; regular solutions are even power series

    w(r) = 1 + w2 r^2 + w4 r^4 + ...,   A(r) = 1 + a2 r^2 + a4 r^4 + ...

fixed entirely by ``w2 = -lambda/2``.  Substituting into the field equations
and matching powers of ``r`` gives ``a2 = -lambda^2`` and, at fourth order,
``w4 = 3 lambda^2/40 - lambda^3/10``, ``a4 = 2 lambda^3/5``.
"""

from __future__ import annotations

from dataclasses import dataclass

from .system import FieldState, check_lambda

SUPPORTED_ORDERS = (2, 4)
MAX_R0 = 0.01


@dataclass(frozen=True)
class SeriesCoefficients:
    """Coefficients of even powers ``r^0, r^2, r^4, ...`` for ``w`` and ``A``."""

    w: tuple[float, ...]
    A: tuple[float, ...]


@dataclass(frozen=True)
class SeriesStart:
    lam: float
    r0: float
    order: int
    state: FieldState
    truncation_estimate: float


def series_coefficients(lam: float, order: int = 4) -> SeriesCoefficients:
    lam = check_lambda(lam)
    if order not in SUPPORTED_ORDERS:
        raise ValueError(f"unsupported series order {order!r}; choose from {SUPPORTED_ORDERS}")
    w = [1.0, -0.5 * lam]
    A = [1.0, -lam * lam]
    if order >= 4:
        w.append(3.0 * lam**2 / 40.0 - lam**3 / 10.0)
        A.append(0.4 * lam**3)
    return SeriesCoefficients(w=tuple(w), A=tuple(A))


def _even_series(coeffs, r):
    """Value, first and second derivative of ``sum c_k r^(2k)``."""
    f = df = d2f = 0.0
    for k, c in enumerate(coeffs):
        n = 2 * k
        f += c * r**n
        if n >= 1:
            df += n * c * r ** (n - 1)
        if n >= 2:
            d2f += n * (n - 1) * c * r ** (n - 2)
    return f, df, d2f


def launch_state(lam: float, r0: float = 1e-3, order: int = 4, sign: int = 1) -> SeriesStart:
    """Evaluate the truncated series at ``r0``.

    ``sign=-1`` gives the mirrored start ``w(0) = -1``; the field equations are
    invariant under ``w -> -w``.
    """
    if not (0.0 < r0 <= MAX_R0):
        raise ValueError(f"ignition radius must satisfy 0 < r0 <= {MAX_R0}, got {r0!r}")
    if sign not in (1, -1):
        raise ValueError("sign must be +1 or -1")
    lam = check_lambda(lam)
    co = series_coefficients(lam, order)
    w, wp, wpp = _even_series(co.w, r0)
    A, Ap, _ = _even_series(co.A, r0)
    # Residuals are formed from the increments 1 - w and A - 1 summed directly
    # from the series; forming 1 - w*w from w ~ 1 would swamp r0**order.
    dw, _, _ = _even_series((0.0,) + co.w[1:], r0)
    dA, _, _ = _even_series((0.0,) + co.A[1:], r0)
    u = -dw * (2.0 + dw)
    res_w = r0 * r0 * A * wpp + (-r0 * dA - u * u / r0) * wp + w * u
    res_A = r0 * Ap + 2.0 * wp * wp * A + dA + u * u / (r0 * r0)
    return SeriesStart(
        lam=lam,
        r0=r0,
        order=order,
        state=FieldState(r=r0, w=sign * w, wp=sign * wp, A=A),
        truncation_estimate=abs(res_w) + abs(res_A),
    )
