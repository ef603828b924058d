"""Metric reconstruction and asymptotic diagnostics along a solved orbit.

``T`` obeys a linear homogeneous first-order equation,

    (ln T)' = -(2 A w'^2 + Phi/r) / (2 r A),

so it is recovered by quadrature and fixed up to a constant factor, chosen so
that ``T = 1`` at the outermost sample.  Near the origin the integrand is
``-lambda^2 r / 2 + O(r^3)``, which is what makes ``T'(0) = 0``.

Mass is reported in two conventions: ``mu = lim r (1 - A)`` and the
Schwarzschild-style ``m = mu / 2`` (``A ~ 1 - 2m/r``).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .integrator import SolutionProfile, StayedInGamma
from .system import FieldState, f_norm_sq, f_norm_sq_weighted

_GL_X, _GL_W = np.polynomial.legendre.leggauss(5)

MASS_CONVENTION_NOTE = "mu = lim r(1-A); m_inf = mu/2 so that A ~ 1 - 2 m_inf / r"


def log_T_derivative(r, w, wp, A):
    """Integrand ``(ln T)'``; vectorized over numpy arrays."""
    u = 1.0 - w * w
    phi_over_r = (1.0 - A) - u * u / (r * r)
    return -(2.0 * A * wp * wp + phi_over_r) / (2.0 * r * A)


def _require_positive_A(profile):
    if np.any(profile.A <= 0):
        k = int(np.argmax(profile.A <= 0))
        raise ValueError(f"A <= 0 at r={profile.r[k]:.6g}; T is undefined there")


def integrate_T(profile: SolutionProfile) -> tuple[np.ndarray, np.ndarray]:
    """``(r, T)`` on the profile samples, normalized to ``T(r_end) = 1``.

    Uses 5-point Gauss-Legendre on each step's interpolant, or the trapezoid
    rule on the samples when the profile carries no interpolants.
    """
    _require_positive_A(profile)
    r = profile.r
    if profile.segments:
        inc = np.empty(len(r) - 1)
        for k, seg in enumerate(profile.segments):
            a, b = r[k], r[k + 1]
            if b <= a:
                inc[k] = 0.0
                continue
            xs = 0.5 * (b - a) * _GL_X + 0.5 * (a + b)
            ys = np.array([seg(x) for x in xs])
            g = log_T_derivative(xs, ys[:, 0], ys[:, 1], ys[:, 2])
            inc[k] = 0.5 * (b - a) * float(np.dot(_GL_W, g))
    else:
        g = log_T_derivative(r, profile.w, profile.wp, profile.A)
        inc = 0.5 * (g[1:] + g[:-1]) * np.diff(r)
    lnT = np.concatenate([[0.0], np.cumsum(inc)])
    lnT -= lnT[-1]
    T = np.exp(lnT)
    T[-1] = 1.0
    return r.copy(), T


def mass_function(profile: SolutionProfile) -> tuple[np.ndarray, np.ndarray]:
    return profile.r.copy(), 0.5 * profile.r * (1.0 - profile.A)


def energy_density(profile: SolutionProfile, weighted: bool = False):
    fn = f_norm_sq_weighted if weighted else f_norm_sq
    return profile.r.copy(), np.array([fn(s) for s in profile.states()])


@dataclass(frozen=True)
class MassEstimate:
    mu: float
    m_inf: float
    b: float
    fit_window: tuple
    mu_shifted: float
    shifted_window: tuple
    relative_drift: float
    convention: str = MASS_CONVENTION_NOTE

    def to_dict(self):
        return {
            "mu": self.mu, "m_inf": self.m_inf, "b": self.b,
            "fit_window": list(self.fit_window), "mu_shifted": self.mu_shifted,
            "shifted_window": list(self.shifted_window),
            "relative_drift": self.relative_drift, "convention": self.convention,
        }


def _window_points(profile, lo, hi, n=64):
    """Radii in ``[lo, hi]``: log-spaced through the interpolants, else the samples."""
    if profile.segments:
        rs = np.geomspace(lo, hi, n)
        ys = np.array([profile.at(x) for x in rs])
        return rs, ys
    mask = (profile.r >= lo * (1 - 1e-12)) & (profile.r <= hi * (1 + 1e-12))
    return profile.r[mask], profile.y[mask]


def _fit_const_plus_inverse(r, f):
    """Least squares ``f ~ c + b/r``; returns ``(c, b, rms residual)``."""
    M = np.column_stack([np.ones_like(r), 1.0 / r])
    coef, *_ = np.linalg.lstsq(M, f, rcond=None)
    resid = f - M @ coef
    return float(coef[0]), float(coef[1]), float(np.sqrt(np.mean(resid**2)))


def adm_mass(profile: SolutionProfile, decade: float = 10.0, shift: float = 2.0) -> MassEstimate:
    """Fit ``r (1 - A) = mu + b/r`` over the last decade, and again with the window shifted inward."""
    if not isinstance(profile.fate, StayedInGamma):
        raise ValueError(f"mass limit needs a profile that stayed in Gamma, got {profile.fate.kind}")
    r_end = profile.r_end
    win = (r_end / decade, r_end)
    win2 = (r_end / (decade * shift), r_end / shift)
    if win2[0] < profile.r[0]:
        raise ValueError("profile too short for the shifted fit window")
    fits = []
    for lo, hi in (win, win2):
        rs, ys = _window_points(profile, lo, hi)
        if len(rs) < 3:
            raise ValueError(f"insufficient samples in fit window [{lo:.4g}, {hi:.4g}]")
        fits.append(_fit_const_plus_inverse(rs, rs * (1.0 - ys[:, 2])))
    mu, b, _ = fits[0]
    mu2 = fits[1][0]
    drift = abs(mu - mu2) / abs(mu) if mu != 0 else abs(mu - mu2)
    return MassEstimate(mu=mu, m_inf=0.5 * mu, b=b, fit_window=win, mu_shifted=mu2,
                        shifted_window=win2, relative_drift=drift)


@dataclass(frozen=True)
class FlatnessTolerances:
    tol_A: float = 1e-3
    tol_T: float = 1e-3
    # rms residual of the ln T ~ c + b/r fit, relative to max |ln T| on the window
    tol_fit: float = 1e-2


@dataclass(frozen=True)
class FlatnessReport:
    A_end: float
    A_margin: float
    A_allowed: float
    T_inf: float
    T_slope: float
    T_margin: float
    T_allowed: float
    T_fit_residual: float
    passed: bool

    def to_dict(self):
        return dict(self.__dict__)


def flatness_report(profile: SolutionProfile, T_samples, tol: FlatnessTolerances = FlatnessTolerances(),
                    mass: Optional[MassEstimate] = None) -> FlatnessReport:
    """``A -> 1`` within the ``mu`` tail, and ``T`` consistent with ``T_inf (1 + b/r)``."""
    if not isinstance(profile.fate, StayedInGamma):
        raise ValueError(f"flatness needs a profile that stayed in Gamma, got {profile.fate.kind}")
    mass = mass or adm_mass(profile)
    r_end = profile.r_end
    A_end = float(profile.A[-1])
    A_allowed = 2.0 * abs(mass.mu) / r_end + tol.tol_A
    A_margin = abs(A_end - 1.0)

    rT, T = T_samples
    mask = rT >= r_end / 10.0
    lnT = np.log(T[mask])
    if np.count_nonzero(mask) >= 3:
        c, slope, rms = _fit_const_plus_inverse(rT[mask], lnT)
    else:
        c, slope, rms = 0.0, 0.0, 0.0
    scale = float(np.max(np.abs(lnT))) if lnT.size else 0.0
    fit_rel = rms / scale if scale > 0 else 0.0
    T_inf = math.exp(c)
    T_margin = abs(T_inf - 1.0)
    T_allowed = 2.0 * abs(slope) / r_end + tol.tol_T
    passed = A_margin <= A_allowed and T_margin <= T_allowed and fit_rel <= tol.tol_fit
    return FlatnessReport(A_end=A_end, A_margin=A_margin, A_allowed=A_allowed, T_inf=T_inf,
                          T_slope=slope, T_margin=T_margin, T_allowed=T_allowed,
                          T_fit_residual=fit_rel, passed=bool(passed))


@dataclass(frozen=True)
class MetricReport:
    T_samples: tuple
    mass_samples: tuple
    energy: tuple
    energy_weighted: tuple
    min_mass_increment: float
    adm: Optional[MassEstimate]
    flatness: Optional[FlatnessReport]
    energy_tail_nonincreasing: Optional[bool]

    def to_dict(self):
        return {
            "min_mass_increment": self.min_mass_increment,
            "adm_mass": None if self.adm is None else self.adm.to_dict(),
            "flatness": None if self.flatness is None else self.flatness.to_dict(),
            "energy_tail_nonincreasing": self.energy_tail_nonincreasing,
            "T_end": float(self.T_samples[1][-1]) if self.T_samples else None,
            "T_min": float(np.min(self.T_samples[1])) if self.T_samples else None,
        }


def metric_report(profile: SolutionProfile, tol: FlatnessTolerances = FlatnessTolerances()) -> MetricReport:
    """Everything derivable from one profile; asymptotic parts only if it stayed in Gamma."""
    rm, m = mass_function(profile)
    dm = np.diff(m)
    T_samples = integrate_T(profile) if np.all(profile.A > 0) else ()
    adm = flat = tail = None
    if isinstance(profile.fate, StayedInGamma) and T_samples:
        try:
            adm = adm_mass(profile)
            flat = flatness_report(profile, T_samples, tol, adm)
        except ValueError:
            pass
        rE, F2 = energy_density(profile)
        tailF = F2[rE >= profile.r_end / 10.0]
        tail = bool(np.all(np.diff(tailF) <= 0)) if tailF.size > 1 else None
    return MetricReport(
        T_samples=T_samples, mass_samples=(rm, m), energy=energy_density(profile),
        energy_weighted=energy_density(profile, weighted=True),
        min_mass_increment=float(dm.min()) if dm.size else 0.0,
        adm=adm, flatness=flat, energy_tail_nonincreasing=tail,
    )


def state_at(profile: SolutionProfile, r: float) -> FieldState:
    w, wp, A = profile.at(r)
    return FieldState(r=float(r), w=float(w), wp=float(wp), A=float(A))
