"""Orbit integration from the ignition radius with event location and fate classification.

An orbit ``(w, w')`` launched from the regular origin starts in the region
``Gamma = {w^2 <= 1, w' <= 0}``.  It is followed until the first of:

* ``w`` crosses ``-1`` (leaves Gamma through the bottom line),
* ``w'`` returns to zero with ``-1 < w < 1``,
* ``A`` drops to ``a_min``,
* ``|w'|`` reaches ``wp_blowup`` or the step size collapses,
* ``r`` reaches ``r_max``.

``A -> 0`` and ``|w'| -> inf`` typically happen at the same radius (``w'``
diverges like ``A**-1/2``).  When ``A`` first drops to ``a_min`` the orbit is
therefore followed further, down to ``a_min * A_CONFIRM_FACTOR``: if ``|w'|``
reaches ``wp_blowup`` on the way the fate is a derivative blow-up, otherwise
``A`` vanished with ``w'`` bounded.
"""

from __future__ import annotations

import bisect
import math
from dataclasses import dataclass, field, fields, replace
from typing import Callable, ClassVar, Optional

import numpy as np

from .series import SUPPORTED_ORDERS, launch_state
from .stepper import make_stepper
from .system import check_lambda, rhs_tuple

A_CONFIRM_FACTOR = 1e-3
SCHEMES = ("dp54", "dop853")


class IntegrationError(RuntimeError):
    """The integrator gave up before reaching any terminal event."""


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class IntegrationConfig:
    rel_tol: float = 1e-10
    abs_tol: float = 1e-12
    r_max: float = 1e3
    a_min: float = 1e-12
    wp_blowup: float = 1e6
    min_step: float = 1e-14
    max_steps: int = 200_000
    r0: float = 1e-3
    series_order: int = 4
    scheme: str = "dp54"

    def __post_init__(self):
        errs = []
        if not (self.rel_tol > 0 and self.abs_tol > 0):
            errs.append("rel_tol and abs_tol must be positive")
        if not (0.0 < self.r0 <= 0.01):
            errs.append("r0 must lie in (0, 0.01]")
        if not (self.r_max > self.r0):
            errs.append("r_max must exceed r0")
        if not self.a_min > 0:
            errs.append("a_min must be positive")
        if not self.wp_blowup > 1:
            errs.append("wp_blowup must exceed 1")
        if not self.min_step > 0:
            errs.append("min_step must be positive")
        if not (isinstance(self.max_steps, int) and self.max_steps > 0):
            errs.append("max_steps must be a positive integer")
        if self.series_order not in SUPPORTED_ORDERS:
            errs.append(f"series_order must be one of {SUPPORTED_ORDERS}")
        if self.scheme not in SCHEMES:
            errs.append(f"scheme must be one of {SCHEMES}")
        if errs:
            raise ConfigError("; ".join(errs))

    def with_(self, **kw) -> "IntegrationConfig":
        return replace(self, **kw)

    @classmethod
    def field_names(cls):
        return [f.name for f in fields(cls)]


DEFAULT_CONFIG = IntegrationConfig()


# -- fates -----------------------------------------------------------------------


@dataclass(frozen=True)
class OrbitFate:
    kind: ClassVar[str] = "undecided"

    @property
    def radius(self) -> float:
        raise NotImplementedError

    def to_dict(self) -> dict:
        d = {"kind": self.kind}
        d.update({f.name: getattr(self, f.name) for f in fields(self)})
        return d


@dataclass(frozen=True)
class ExitThroughWMinusOne(OrbitFate):
    kind: ClassVar[str] = "exit_w_minus_one"
    r_exit: float
    wp: float

    @property
    def radius(self):
        return self.r_exit


@dataclass(frozen=True)
class WPrimeVanished(OrbitFate):
    kind: ClassVar[str] = "wprime_vanished"
    r: float
    w: float

    @property
    def radius(self):
        return self.r


@dataclass(frozen=True)
class AVanished(OrbitFate):
    kind: ClassVar[str] = "a_vanished"
    r: float
    w: float

    @property
    def radius(self):
        return self.r


@dataclass(frozen=True)
class DerivativeBlowUp(OrbitFate):
    kind: ClassVar[str] = "derivative_blowup"
    r: float
    w: float
    nonfinite: bool = False
    step_collapse: bool = False
    # A also dropped below a_min on the way in (simultaneous A -> 0).
    with_a_vanishing: bool = False

    @property
    def radius(self):
        return self.r


@dataclass(frozen=True)
class StayedInGamma(OrbitFate):
    kind: ClassVar[str] = "stayed_in_gamma"
    r_reached: float

    @property
    def radius(self):
        return self.r_reached


@dataclass(frozen=True)
class RestPoint(OrbitFate):
    kind: ClassVar[str] = "rest_point"
    r_reached: float

    @property
    def radius(self):
        return self.r_reached


FATE_KINDS = tuple(
    cls.kind
    for cls in (ExitThroughWMinusOne, WPrimeVanished, AVanished, DerivativeBlowUp, StayedInGamma, RestPoint)
)


# -- profile ---------------------------------------------------------------------


@dataclass(frozen=True)
class SolutionProfile:
    """Accepted samples of one orbit, its fate, and per-step interpolants.

    ``segments[k]`` interpolates ``(w, w', A)`` on ``[r[k], r[k+1]]``.  A
    profile built from closed-form data has no segments and falls back to
    linear interpolation.
    """

    lam: float
    r: np.ndarray
    y: np.ndarray
    fate: OrbitFate
    diagnostics: dict
    config: Optional[IntegrationConfig] = None
    segments: tuple = field(default=(), repr=False)

    def __post_init__(self):
        self.r.setflags(write=False)
        self.y.setflags(write=False)

    @classmethod
    def from_arrays(cls, lam, r, w, wp, A, fate, config=None):
        r = np.asarray(r, dtype=float)
        y = np.column_stack([w, wp, A]).astype(float)
        return cls(lam=lam, r=r, y=y, fate=fate, diagnostics=summarize(r, y), config=config)

    @property
    def w(self):
        return self.y[:, 0]

    @property
    def wp(self):
        return self.y[:, 1]

    @property
    def A(self):
        return self.y[:, 2]

    @property
    def r_end(self) -> float:
        return float(self.r[-1])

    def __len__(self):
        return len(self.r)

    def states(self):
        from .system import FieldState

        for r, (w, wp, A) in zip(self.r, self.y):
            yield FieldState(float(r), float(w), float(wp), float(A))

    def at(self, r: float) -> np.ndarray:
        """``(w, w', A)`` at radius ``r`` inside the sampled range."""
        if not (self.r[0] <= r <= self.r[-1]):
            raise ValueError(f"r={r} outside profile range [{self.r[0]}, {self.r[-1]}]")
        if not self.segments:
            return np.array([np.interp(r, self.r, self.y[:, j]) for j in range(3)])
        k = min(max(bisect.bisect_right(self.r, r) - 1, 0), len(self.segments) - 1)
        return np.asarray(self.segments[k](r))


def summarize(r, y) -> dict:
    w, wp, A = y[:, 0], y[:, 1], y[:, 2]
    s = np.sign(w)
    s = s[s != 0]
    return {
        "min_A": float(A.min()),
        "max_A": float(A.max()),
        "min_wp": float(wp.min()),
        "max_wp": float(wp.max()),
        "node_count": int(np.count_nonzero(s[1:] != s[:-1])),
        "max_abs_v": float(np.max(np.abs(A * wp))),
        "samples": int(len(r)),
    }


# -- driver ----------------------------------------------------------------------


def _default_rhs(r, y):
    w, wp, A = y.tolist()
    return rhs_tuple(r, w, wp, A)


def _refine(seg, g, a, b, rtol):
    """Bisect ``[a, b]`` on the interpolant for the first point where ``g > 0``.

    ``g(seg(a)) <= 0 < g(seg(b))`` on entry.  Returns the right end of the
    final bracket, so the reported state has already crossed.
    """
    for _ in range(200):
        if b - a <= rtol * abs(b):
            break
        m = 0.5 * (a + b)
        if m <= a or m >= b:
            break
        if g(seg(m)) > 0:
            b = m
        else:
            a = m
    return b


def integrate_orbit(lam: float, cfg: IntegrationConfig = DEFAULT_CONFIG, *,
                    rhs: Optional[Callable] = None) -> SolutionProfile:
    """Integrate one orbit from the ignition radius to its first terminal event.

    ``rhs(r, y) -> (w', w'', A')`` replaces the field equations; it exists as a
    hook for negative controls.
    """
    lam = check_lambda(lam)
    fun = rhs or _default_rhs
    start = launch_state(lam, cfg.r0, cfg.series_order)
    y0 = np.array(start.state.as_tuple())
    stepper = make_stepper(cfg.scheme, fun, cfg.r0, y0, cfg.r_max,
                           cfg.rel_tol, cfg.abs_tol, cfg.min_step)

    # Each event is "triggered" when g(state) > 0.
    wp_blowup = cfg.wp_blowup
    a_floor = [cfg.a_min]
    events = {
        "exit": lambda y: -(y[0] + 1.0),
        "wprime": lambda y: y[1],
        "a_min": lambda y: a_floor[0] - y[2],
        "blowup": lambda y: abs(y[1]) - wp_blowup,
    }

    rs = [cfg.r0]
    ys = [y0]
    segs = []
    steps = 0
    a_event = None  # (r, w) where A first reached a_min
    fate = None

    while fate is None:
        if steps >= cfg.max_steps:
            raise IntegrationError(
                f"step limit {cfg.max_steps} exhausted at r={stepper.t:.6g} (lambda={lam!r})"
            )
        msg = stepper.step()
        steps += 1
        y_prev = ys[-1]
        if stepper.status == "failed" or (cfg.scheme != "dp54" and stepper.step_size is not None
                                          and stepper.status == "running"
                                          and stepper.step_size < cfg.min_step):
            w_last = float(y_prev[0])
            if w_last * w_last <= 1.0:
                fate = DerivativeBlowUp(r=float(rs[-1]), w=w_last, step_collapse=True,
                                        with_a_vanishing=a_event is not None)
                break
            raise IntegrationError(f"integration failed at r={stepper.t:.6g}: {msg}")

        r_new = float(stepper.t)
        y_new = np.array(stepper.y, dtype=float)
        if not np.all(np.isfinite(y_new)):
            fate = DerivativeBlowUp(r=float(rs[-1]), w=float(y_prev[0]), nonfinite=True,
                                    with_a_vanishing=a_event is not None)
            break

        seg = stepper.dense_output()
        hits = []
        for name, g in events.items():
            if g(y_prev) <= 0 < g(y_new):
                hits.append((_refine(seg, g, float(rs[-1]), r_new, cfg.rel_tol), name))
        if hits:
            r_ev, name = min(hits)
            y_ev = np.asarray(seg(r_ev), dtype=float)
            if name == "a_min" and a_event is None:
                # Arm the confirmation stage and keep going from the full step.
                a_event = (r_ev, float(y_ev[0]))
                a_floor[0] = cfg.a_min * A_CONFIRM_FACTOR
                hits = [h for h in hits if h[1] != "a_min"]
                g = events["a_min"]
                if g(y_new) > 0:
                    hits.append((_refine(seg, g, r_ev, r_new, cfg.rel_tol), "a_min"))
                if not hits:
                    rs.append(r_new)
                    ys.append(y_new)
                    segs.append(seg)
                    continue
                r_ev, name = min(hits)
                y_ev = np.asarray(seg(r_ev), dtype=float)
            rs.append(r_ev)
            ys.append(y_ev)
            segs.append(seg)
            w_ev = float(y_ev[0])
            if name == "exit":
                fate = ExitThroughWMinusOne(r_exit=r_ev, wp=float(y_ev[1]))
            elif name == "wprime":
                fate = WPrimeVanished(r=r_ev, w=w_ev)
            elif name == "blowup":
                fate = DerivativeBlowUp(r=r_ev, w=w_ev, with_a_vanishing=a_event is not None)
            else:
                fate = AVanished(r=a_event[0], w=a_event[1])
            break

        rs.append(r_new)
        ys.append(y_new)
        segs.append(seg)
        if stepper.status == "finished":
            fate = RestPoint(r_reached=r_new) if lam == 0.0 else StayedInGamma(r_reached=r_new)

    r_arr = np.array(rs)
    y_arr = np.array(ys)
    diag = summarize(r_arr, y_arr)
    diag.update(
        steps=steps,
        rejected=int(getattr(stepper, "nrejected", 0)),
        nfev=int(stepper.nfev),
        truncation_estimate=start.truncation_estimate,
        a_min_reached_at=None if a_event is None else a_event[0],
    )
    return SolutionProfile(lam=lam, r=r_arr, y=y_arr, fate=fate, diagnostics=diag,
                           config=cfg, segments=tuple(segs))


# -- verification of the boundedness / blow-up statements -----------------------


@dataclass(frozen=True)
class BoundedOrbitReport:
    lam: float
    fate: OrbitFate
    min_A: float
    min_wp: float
    wp_turned_positive: bool
    passed: bool
    detail: str


def check_bounded_orbit(lam: float, cfg: IntegrationConfig = DEFAULT_CONFIG, *,
                        rhs: Optional[Callable] = None) -> BoundedOrbitReport:
    """For ``0 <= lambda <= 1``: inside Gamma, ``A > 0`` and ``w'`` stays bounded below.

    Also records whether ``w'`` turned positive with ``-1 < w < 0``.
    """
    lam = check_lambda(lam)
    if lam > 1.0:
        raise ValueError(f"bounded-orbit check applies to 0 <= lambda <= 1, got {lam}")
    prof = integrate_orbit(lam, cfg, rhs=rhs)
    d = prof.diagnostics
    bad_fate = isinstance(prof.fate, (AVanished, DerivativeBlowUp))
    ok = d["min_A"] > 0 and math.isfinite(d["min_wp"]) and not bad_fate
    turned = isinstance(prof.fate, WPrimeVanished) and -1.0 < prof.fate.w < 0.0
    detail = f"fate={prof.fate.kind} r={prof.fate.radius:.6g} min_A={d['min_A']:.6g} min_wp={d['min_wp']:.6g}"
    return BoundedOrbitReport(lam=lam, fate=prof.fate, min_A=d["min_A"], min_wp=d["min_wp"],
                              wp_turned_positive=turned, passed=bool(ok), detail=detail)


@dataclass(frozen=True)
class BlowupReport:
    lam: float
    fate: OrbitFate
    r_event: float
    w_end: float
    max_abs_v: float
    threshold_shift: Optional[float]
    passed: bool
    detail: str


def check_blowup(lam: float, cfg: IntegrationConfig = DEFAULT_CONFIG, *,
                 robustness: bool = True, rhs: Optional[Callable] = None) -> BlowupReport:
    """For ``lambda > 2``: ``w'`` must blow up at finite ``r`` with ``w^2 <= 1``.

    With ``robustness`` the orbit is rerun at twice ``wp_blowup``; the event
    radius has to move by less than 1%.
    """
    lam = check_lambda(lam)
    if not lam > 2.0:
        raise ValueError(f"blow-up check applies to lambda > 2, got {lam}")
    prof = integrate_orbit(lam, cfg, rhs=rhs)
    f = prof.fate
    w_end = float(prof.w[-1])
    max_v = prof.diagnostics["max_abs_v"]
    blew = isinstance(f, DerivativeBlowUp)
    # A vanishing only counts when w' exceeded the threshold with A w' bounded.
    if isinstance(f, AVanished):
        blew = abs(prof.diagnostics["min_wp"]) >= cfg.wp_blowup and math.isfinite(max_v)
    ok = blew and w_end * w_end <= 1.0 and f.radius < cfg.r_max
    shift = None
    if robustness and ok:
        other = integrate_orbit(lam, cfg.with_(wp_blowup=2.0 * cfg.wp_blowup), rhs=rhs)
        shift = abs(other.fate.radius - f.radius) / f.radius
        ok = isinstance(other.fate, type(f)) and shift < 0.01
    detail = f"fate={f.kind} r={f.radius:.10g} w={w_end:.6g} max|v|={max_v:.3g}"
    if shift is not None:
        detail += f" shift={shift:.2e}"
    return BlowupReport(lam=lam, fate=f, r_event=f.radius, w_end=w_end, max_abs_v=max_v,
                        threshold_shift=shift, passed=bool(ok), detail=detail)
