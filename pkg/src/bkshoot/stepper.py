"""Explicit embedded Runge-Kutta steppers with dense output.

:class:`DormandPrince54` is the primary engine.  It exposes the same stepping
surface as :class:`scipy.integrate.OdeSolver` (``step``, ``t``, ``t_old``,
``y``, ``status``, ``step_size``, ``dense_output``) so the orbit driver can
run unchanged on scipy's 8(5,3) pair, which serves as an independent second
scheme.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.integrate import DOP853

# Dormand & Prince (1980), 5th-order propagating solution, FSAL.
_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_A = [
    [],
    [1 / 5],
    [3 / 40, 9 / 40],
    [44 / 45, -56 / 15, 32 / 9],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
    [35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84],
]
_A = [np.array(row) for row in _A]
_B = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
# b - b_hat: difference between the 5th- and embedded 4th-order weights.
_E = np.array(
    [71 / 57600, 0.0, -71 / 16695, 71 / 1920, -17253 / 339200, 22 / 525, -1 / 40]
)
# Shampine's 4th-order continuous extension; row i multiplies stage i,
# columns are powers theta^1..theta^4.
_P = np.array(
    [
        [1.0, -8048581381 / 2820520608, 8663915743 / 2820520608, -12715105075 / 11282082432],
        [0.0, 0.0, 0.0, 0.0],
        [0.0, 131558114200 / 32700410799, -68118460800 / 10900136933, 87487479700 / 32700410799],
        [0.0, -1754552775 / 470086768, 14199869525 / 1410260304, -10690763975 / 1880347072],
        [0.0, 127303824393 / 49829197408, -318862633887 / 49829197408, 701980252875 / 199316789632],
        [0.0, -282668133 / 205662961, 2019193451 / 616988883, -1453857185 / 822651844],
        [0.0, 40617522 / 29380423, -110615467 / 29380423, 69997945 / 29380423],
    ]
)

SAFETY = 0.9
MIN_FACTOR = 0.2
MAX_FACTOR = 5.0
# PI controller exponents (Gustafsson), scaled by 1/(q+1) with q = 4.
_ALPHA = 0.7 / 5.0
_BETA = 0.4 / 5.0


class DenseSegment:
    """Quartic interpolant of one accepted step on ``[t_old, t]``."""

    def __init__(self, t_old, t, y_old, Q):
        self.t_old = t_old
        self.t = t
        self.h = t - t_old
        self.y_old = y_old
        self.Q = Q

    def __call__(self, t):
        theta = (t - self.t_old) / self.h
        p = np.array([theta, theta**2, theta**3, theta**4])
        return self.y_old + self.h * (self.Q @ p)


class DormandPrince54:
    """Adaptive Dormand-Prince 5(4) with a PI step-size controller.

    A stage evaluation that raises ``ZeroDivisionError``/``FloatingPointError``
    or returns non-finite values rejects the step instead of aborting, so the
    integrator can creep up to a singular radius.
    """

    def __init__(self, fun, t0, y0, t_bound, rtol=1e-10, atol=1e-12,
                 first_step=None, min_step=1e-14, max_step=math.inf):
        self.fun = fun
        self.t = float(t0)
        self.t_old = None
        self.y = np.asarray(y0, dtype=float).copy()
        self.t_bound = float(t_bound)
        self.rtol = rtol
        self.atol = atol
        self.min_step = min_step
        self.max_step = max_step
        self.status = "running"
        self.nfev = 0
        self.nrejected = 0
        self.f = self._eval(self.t, self.y)
        if self.f is None:
            raise ValueError("right-hand side is not finite at the initial point")
        self.h = first_step if first_step is not None else self._initial_step()
        self.step_size = None
        self._err_prev = 1e-4
        self._K = np.empty((7, self.y.size))
        self._dense = None

    def _eval(self, t, y):
        self.nfev += 1
        try:
            f = np.asarray(self.fun(t, y), dtype=float)
        except (ZeroDivisionError, FloatingPointError, OverflowError):
            return None
        if not np.all(np.isfinite(f)):
            return None
        return f

    def _scale(self, y_a, y_b):
        return self.atol + self.rtol * np.maximum(np.abs(y_a), np.abs(y_b))

    def _initial_step(self):
        # Hairer, Norsett & Wanner, II.4 starting step heuristic.
        span = self.t_bound - self.t
        sc = self._scale(self.y, self.y)
        d0 = np.sqrt(np.mean((self.y / sc) ** 2))
        d1 = np.sqrt(np.mean((self.f / sc) ** 2))
        h0 = 1e-6 if d0 < 1e-5 or d1 < 1e-5 else 0.01 * d0 / d1
        h0 = min(h0, span)
        f1 = self._eval(self.t + h0, self.y + h0 * self.f)
        if f1 is None:
            return h0 * 1e-3
        d2 = np.sqrt(np.mean(((f1 - self.f) / sc) ** 2)) / h0
        if max(d1, d2) <= 1e-15:
            h1 = max(1e-6, h0 * 1e-3)
        else:
            h1 = (0.01 / max(d1, d2)) ** (1 / 5)
        return min(100 * h0, h1, span, self.max_step)

    def _attempt(self, h):
        t, y, K = self.t, self.y, self._K
        K[0] = self.f
        for i in range(1, 7):
            yi = y + h * (_A[i] @ K[:i])
            fi = self._eval(t + _C[i] * h, yi)
            if fi is None:
                return None, math.inf
            K[i] = fi
        y_new = y + h * (_B @ K)
        err_vec = h * (_E @ K) / self._scale(y, y_new)
        err = float(np.sqrt(np.mean(err_vec**2)))
        if not math.isfinite(err):
            return None, math.inf
        return y_new, err

    def step(self):
        if self.status != "running":
            raise RuntimeError("stepper is not running")
        h = min(self.h, self.max_step, self.t_bound - self.t)
        rejected = False
        while True:
            if h < self.min_step and self.t + h < self.t_bound:
                self.status = "failed"
                self.step_size = h
                return "step size fell below min_step"
            y_new, err = self._attempt(h)
            if err <= 1.0:
                break
            self.nrejected += 1
            rejected = True
            if math.isinf(err):
                factor = MIN_FACTOR
            else:
                factor = max(MIN_FACTOR, SAFETY * err ** (-1 / 5))
            h *= factor
        t_new = self.t + h
        if t_new >= self.t_bound or self.t_bound - t_new < 1e-15 * abs(self.t_bound):
            t_new = self.t_bound
            self.status = "finished"
        err = max(err, 1e-10)
        factor = SAFETY * err ** (-_ALPHA) * self._err_prev ** _BETA
        factor = min(MAX_FACTOR, max(MIN_FACTOR, factor))
        if rejected:
            factor = min(1.0, factor)
        self._err_prev = err
        self._dense = DenseSegment(self.t, t_new, self.y.copy(), (self._K.T @ _P).copy())
        self.t_old, self.t = self.t, t_new
        self.y = y_new
        self.f = self._K[6].copy()
        self.step_size = h
        self.h = h * factor
        return None

    def dense_output(self):
        if self._dense is None:
            raise RuntimeError("no step taken yet")
        return self._dense


def make_stepper(scheme, fun, t0, y0, t_bound, rtol, atol, min_step):
    """Build a stepper for ``scheme`` in ``{"dp54", "dop853"}``."""
    if scheme == "dp54":
        return DormandPrince54(fun, t0, y0, t_bound, rtol=rtol, atol=atol, min_step=min_step)
    if scheme == "dop853":
        return _SafeDOP853(fun, t0, y0, t_bound, rtol=rtol, atol=atol)
    raise ValueError(f"unknown integration scheme {scheme!r}")


class _SafeDOP853(DOP853):
    """scipy's DOP853 with singular stage evaluations mapped to NaN.

    NaN drives scipy's error norm to reject-and-shrink, which mirrors
    :class:`DormandPrince54`'s handling of the ``A -> 0`` approach.
    """

    def __init__(self, fun, *args, **kwargs):
        def guarded(t, y):
            try:
                return np.asarray(fun(t, y), dtype=float)
            except (ZeroDivisionError, FloatingPointError, OverflowError):
                return np.full(len(y), np.nan)

        super().__init__(guarded, *args, **kwargs)
