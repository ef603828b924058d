"""Fate sweeps and bisection for the connecting shooting parameter.

The bisection predicate is "the orbit leaves Gamma through ``w = -1``".
Every other fate counts as not exiting.  The smallest non-exiting ``lambda``
is the parameter of the smooth particle-like solution: its orbit runs from
``(w, w') = (1, 0)`` at the origin to ``(-1, 0)`` at infinity.

Exiting parameters are not proven to form an interval, so the result is a
bracket boundary.  :func:`sweep` gives the empirical fate map.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .integrator import (
    DEFAULT_CONFIG,
    ExitThroughWMinusOne,
    IntegrationConfig,
    IntegrationError,
    OrbitFate,
    SolutionProfile,
    StayedInGamma,
    integrate_orbit,
)
from .system import DomainError


class BracketError(ValueError):
    """The starting bracket does not straddle the exit / non-exit cut."""


class ToleranceError(ValueError):
    pass


class PreconditionError(ValueError):
    pass


def exits(fate: OrbitFate) -> bool:
    return isinstance(fate, ExitThroughWMinusOne)


# -- sweep -----------------------------------------------------------------------


@dataclass(frozen=True)
class FateEntry:
    lam: float
    fate: Optional[OrbitFate]
    summary: dict
    error: Optional[str] = None


@dataclass(frozen=True)
class FateMap:
    entries: tuple

    def __iter__(self):
        return iter(self.entries)

    def __len__(self):
        return len(self.entries)

    @property
    def lambdas(self):
        return [e.lam for e in self.entries]

    @property
    def kinds(self):
        return [None if e.fate is None else e.fate.kind for e in self.entries]

    def transitions(self):
        """Indices ``i`` where the fate kind differs between entries ``i`` and ``i+1``."""
        k = self.kinds
        return [i for i in range(len(k) - 1) if k[i] != k[i + 1]]


def _sweep_one(lam, cfg):
    try:
        prof = integrate_orbit(lam, cfg)
    except (IntegrationError, DomainError) as exc:
        return FateEntry(lam=lam, fate=None, summary={}, error=f"{type(exc).__name__}: {exc}")
    s = dict(prof.diagnostics)
    s.update(r_end=prof.r_end, w_end=float(prof.w[-1]), wp_end=float(prof.wp[-1]),
             A_end=float(prof.A[-1]))
    return FateEntry(lam=lam, fate=prof.fate, summary=s)


def sweep(lambdas, cfg: IntegrationConfig = DEFAULT_CONFIG, threads: int = 1) -> FateMap:
    """Integrate one orbit per ``lambda``; per-entry failures are recorded, not raised."""
    lams = [float(x) for x in lambdas]
    if any(not (math.isfinite(x) and x >= 0) for x in lams):
        raise ValueError("sweep values must be finite and >= 0")
    if any(b <= a for a, b in zip(lams, lams[1:])):
        raise ValueError("sweep values must be strictly increasing")
    if threads > 1 and len(lams) > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            entries = list(pool.map(_sweep_one, lams, [cfg] * len(lams)))
    else:
        entries = [_sweep_one(x, cfg) for x in lams]
    return FateMap(entries=tuple(entries))


def lambda_grid(start: float, stop: float, step: float) -> list[float]:
    """Inclusive arithmetic grid, robust to rounding of the last point."""
    if not step > 0:
        raise ValueError("grid step must be positive")
    if stop < start:
        return []
    n = int(math.floor((stop - start) / step + 1e-9)) + 1
    return [round(start + i * step, 12) for i in range(n)]


# -- connection checks -----------------------------------------------------------


@dataclass(frozen=True)
class ConnectionTolerances:
    tol_w: float = 0.05
    tol_wp: float = 0.01
    tol_A: float = 0.01


@dataclass(frozen=True)
class ConnectionReport:
    r_end: float
    w_end: float
    wp_end: float
    A_end: float
    mass_limit: float
    mass_drift: float
    checks: dict
    passed: bool

    def to_dict(self):
        return {
            "r_end": self.r_end, "w_end": self.w_end, "wp_end": self.wp_end,
            "A_end": self.A_end, "mass_limit": self.mass_limit,
            "mass_drift": self.mass_drift, "checks": self.checks, "passed": self.passed,
        }


def verify_connection(profile: SolutionProfile,
                      tol: ConnectionTolerances = ConnectionTolerances()) -> ConnectionReport:
    """Check ``(w, w') -> (-1, 0)`` and ``A -> 1`` at the end of a profile that stayed in Gamma."""
    from .metric import adm_mass

    if not isinstance(profile.fate, StayedInGamma):
        raise PreconditionError(
            f"connection checks need a profile that stayed in Gamma, got {profile.fate.kind}"
        )
    w, wp, A = (float(x) for x in profile.y[-1])
    r_end = profile.r_end
    try:
        est = adm_mass(profile)
        mu, drift = est.mu, est.relative_drift
    except ValueError:
        mu, drift = float("nan"), float("nan")
    mass = 0.5 * mu if math.isfinite(mu) else 0.0
    a_allow = tol.tol_A + 2.0 * abs(mass) / r_end

    def chk(value, limit):
        return {"value": value, "limit": limit, "passed": bool(value <= limit)}

    checks = {
        "w_to_minus_one": chk(abs(w + 1.0), tol.tol_w),
        "wp_to_zero": chk(abs(wp), tol.tol_wp),
        "A_to_one": chk(abs(A - 1.0), a_allow),
    }
    return ConnectionReport(
        r_end=r_end, w_end=w, wp_end=wp, A_end=A, mass_limit=mu, mass_drift=drift,
        checks=checks, passed=all(c["passed"] for c in checks.values()),
    )


# -- bisection -------------------------------------------------------------------


@dataclass(frozen=True)
class ShootingResult:
    lambda_lo: float
    lambda_hi: float
    lambda_bar: float
    iterations: int
    refine_iterations: int
    fate_lo: OrbitFate
    fate_hi: OrbitFate
    profile: SolutionProfile
    connection: Optional[ConnectionReport]
    history: list = field(default_factory=list, repr=False)

    @property
    def width(self):
        return self.lambda_hi - self.lambda_lo

    def to_dict(self):
        return {
            "lambda_lo": self.lambda_lo, "lambda_hi": self.lambda_hi,
            "lambda_bar": self.lambda_bar, "width": self.width,
            "iterations": self.iterations, "refine_iterations": self.refine_iterations,
            "fate_lo": self.fate_lo.to_dict(), "fate_hi": self.fate_hi.to_dict(),
            "fate_bar": self.profile.fate.to_dict(),
            "connection": None if self.connection is None else self.connection.to_dict(),
        }


def find_lambda_bar(lo: float = 0.1, hi: float = 2.0, tol: float = 1e-6,
                    cfg: IntegrationConfig = DEFAULT_CONFIG, *, max_iter: int = 200,
                    tolerances: ConnectionTolerances = ConnectionTolerances()) -> ShootingResult:
    """Bisect on the exit predicate until the bracket is narrower than ``tol``.

    Once the width is below ``tol`` the bracket keeps shrinking until the
    midpoint orbit reaches ``r_max`` inside Gamma (or floating-point resolution
    runs out).  Near the connecting parameter the growing mode at ``w = -1``
    amplifies ``|lambda - lambda_bar|`` like ``r^2``, so a midpoint that is
    merely ``tol``-close typically still leaves Gamma well before ``r_max``.
    """
    if not tol > 0:
        raise ToleranceError("tol must be positive")
    if not (0 <= lo < hi):
        raise BracketError(f"need 0 <= lo < hi, got lo={lo}, hi={hi}")
    if tol < 4 * np.spacing(hi):
        raise ToleranceError(f"tol={tol} is below floating-point resolution near {hi}")
    needed = math.ceil(math.log2((hi - lo) / tol)) if hi - lo > tol else 0
    if needed > max_iter:
        raise ToleranceError(f"tol={tol} needs {needed} bisections, above max_iter={max_iter}")

    p_lo = integrate_orbit(lo, cfg)
    p_hi = integrate_orbit(hi, cfg)
    if not exits(p_lo.fate):
        raise BracketError(f"fate at lo={lo} is {p_lo.fate.kind}, expected exit through w=-1")
    if exits(p_hi.fate):
        raise BracketError(f"fate at hi={hi} exits through w=-1; need a non-exiting upper end")
    fate_lo, fate_hi = p_lo.fate, p_hi.fate
    history = [(lo, fate_lo.kind), (hi, fate_hi.kind)]

    iterations = 0
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        prof = integrate_orbit(mid, cfg)
        history.append((mid, prof.fate.kind))
        if exits(prof.fate):
            lo, fate_lo = mid, prof.fate
        else:
            hi, fate_hi = mid, prof.fate
        iterations += 1

    refine = 0
    while True:
        mid = 0.5 * (lo + hi)
        prof = integrate_orbit(mid, cfg)
        history.append((mid, prof.fate.kind))
        if isinstance(prof.fate, StayedInGamma) or mid <= lo or mid >= hi:
            break
        if exits(prof.fate):
            lo, fate_lo = mid, prof.fate
        else:
            hi, fate_hi = mid, prof.fate
        refine += 1

    connection = None
    if isinstance(prof.fate, StayedInGamma):
        connection = verify_connection(prof, tolerances)
    return ShootingResult(
        lambda_lo=lo, lambda_hi=hi, lambda_bar=mid, iterations=iterations,
        refine_iterations=refine, fate_lo=fate_lo, fate_hi=fate_hi, profile=prof,
        connection=connection, history=history,
    )
