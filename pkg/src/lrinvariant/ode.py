"""Adaptive Dormand-Prince 5(4) integrator with continuous dense output.

Small and deterministic: the caller supplies the vector field, the step
controller uses the componentwise max norm, and every accepted step keeps the
coefficients of the quartic interpolant so the trajectory can be sampled at
arbitrary times afterwards.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .errors import BlowUp, NonFiniteRhs, StepLimitExceeded

try:
    import numba
    from numba.core.registry import CPUDispatcher
except ImportError:  # pragma: no cover
    numba = None
    CPUDispatcher = ()

# Dormand & Prince (1980) tableau, FSAL form.
_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0])
_A = [
    np.array([]),
    np.array([1 / 5]),
    np.array([3 / 40, 9 / 40]),
    np.array([44 / 45, -56 / 15, 32 / 9]),
    np.array([19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729]),
    np.array([9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656]),
]
_B = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84])
# difference between the 5th and embedded 4th order weights (7 stages, FSAL)
_E = np.array([-71 / 57600, 0.0, 71 / 16695, -71 / 1920, 17253 / 339200, -22 / 525, 1 / 40])
# quartic continuous extension (Shampine 1986)
_P = np.array([
    [1, -8048581381 / 2820520608, 8663915743 / 2820520608, -12715105075 / 11282082432],
    [0, 0, 0, 0],
    [0, 131558114200 / 32700410799, -68118460800 / 10900136933, 87487479700 / 32700410799],
    [0, -1754552775 / 470086768, 14199869525 / 1410260304, -10690763975 / 1880347072],
    [0, 127303824393 / 49829197408, -318862633887 / 49829197408, 701980252875 / 199316789632],
    [0, -282668133 / 205662961, 2019193451 / 616988883, -1453857185 / 822651844],
    [0, 40617522 / 29380423, -110615467 / 29380423, 69997945 / 29380423],
])

_SAFETY = 0.9
_MIN_FACTOR = 0.2
_MAX_FACTOR = 10.0


@dataclass(frozen=True, eq=False)
class IntegrationProblem:
    """Initial value problem y' = rhs(t, y) on ``t_span`` (which may run backwards).

    ``guard(t, y)`` is called after every accepted step and may raise to abort
    the integration (used for positivity floors).

    When ``params`` is given the field is called as ``rhs(t, y, params)``.  A
    ``numba.njit`` field runs through the compiled stepping loop; guards are
    not available on that path.
    """

    rhs: Callable[..., np.ndarray]
    initial_state: np.ndarray
    t_span: tuple
    rel_tol: float = 1e-8
    abs_tol: float = 1e-10
    max_steps: int = 100_000
    dense_output: bool = True
    blowup_bound: float = 1e12
    guard: Optional[Callable[[float, np.ndarray], None]] = None
    max_step: float = math.inf
    params: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.rel_tol < 1e-14 or self.abs_tol < 1e-14:
            raise ValueError("rel_tol and abs_tol must be >= 1e-14")
        if self.max_steps < 1:
            raise ValueError("max_steps must be >= 1")
        object.__setattr__(self, "initial_state",
                           np.array(self.initial_state, dtype=float).reshape(-1))
        t0, t1 = (float(v) for v in self.t_span)
        object.__setattr__(self, "t_span", (t0, t1))


class Trajectory:
    """Accepted step nodes plus a piecewise quartic interpolant.

    ``times`` is strictly monotone in the integration direction.
    """

    def __init__(self, times, states, coeffs=None):
        self.times = np.asarray(times, dtype=float)
        self.states = np.asarray(states, dtype=float)
        # coeffs[i] has shape (n_state, 4): y(t_i + s h_i) = y_i + Q_i @ [s, s^2, s^3, s^4]
        self._coeffs = coeffs

    @property
    def t_span(self):
        return float(self.times[0]), float(self.times[-1])

    def _locate(self, t):
        ta = np.atleast_1d(np.asarray(t, dtype=float))
        lo, hi = sorted(self.t_span)
        if np.any(ta < lo - 1e-12 * max(1.0, abs(lo))) or np.any(ta > hi + 1e-12 * max(1.0, abs(hi))):
            raise ValueError(f"t={t!r} outside trajectory span [{lo}, {hi}]")
        if self._coeffs is None:
            raise ValueError("trajectory was integrated without dense output")
        forward = self.times[-1] >= self.times[0]
        key = self.times if forward else -self.times
        tk = ta if forward else -ta
        idx = np.clip(np.searchsorted(key, tk, side="right") - 1, 0, len(self.times) - 2)
        h = self.times[idx + 1] - self.times[idx]
        s = (ta - self.times[idx]) / h
        return ta, idx, h, s

    def __call__(self, t):
        """States at ``t`` (shape ``(n_state,)`` for scalar t, else ``(len(t), n_state)``)."""
        scalar = np.ndim(t) == 0
        ta, idx, h, s = self._locate(t)
        powers = np.stack([s, s ** 2, s ** 3, s ** 4], axis=-1)
        out = self.states[idx] + np.einsum("nkj,nj->nk", self._coeffs[idx], powers)
        return out[0] if scalar else out

    def derivative(self, t):
        """Time derivative of the interpolant."""
        scalar = np.ndim(t) == 0
        ta, idx, h, s = self._locate(t)
        dpowers = np.stack([np.ones_like(s), 2 * s, 3 * s ** 2, 4 * s ** 3], axis=-1)
        out = np.einsum("nkj,nj->nk", self._coeffs[idx], dpowers) / h[:, None]
        return out[0] if scalar else out


def _initial_step(rhs, t0, y0, f0, direction, order, rtol, atol):
    # Hairer, Norsett & Wanner, Solving ODEs I, sec. II.4
    scale = atol + np.abs(y0) * rtol
    d0 = np.max(np.abs(y0) / scale)
    d1 = np.max(np.abs(f0) / scale)
    h0 = 1e-6 if d0 < 1e-5 or d1 < 1e-5 else 0.01 * d0 / d1
    y1 = y0 + h0 * direction * f0
    f1 = rhs(t0 + h0 * direction, y1)
    d2 = np.max(np.abs(f1 - f0) / scale) / h0
    if d1 <= 1e-15 and d2 <= 1e-15:
        h1 = max(1e-6, h0 * 1e-3)
    else:
        h1 = (0.01 / max(d1, d2)) ** (1.0 / (order + 1))
    return min(100 * h0, h1)


def integrate(problem: IntegrationProblem) -> Trajectory:
    """Integrate ``problem`` with adaptive DOPRI5 steps.

    Raises
    ------
    StepLimitExceeded
        ``max_steps`` accepted-or-rejected steps were taken before reaching t1.
    NonFiniteRhs
        the vector field returned NaN or Inf.
    BlowUp
        the state max norm exceeded ``problem.blowup_bound``.
    """
    t0, t1 = problem.t_span
    if t1 == t0:
        y = problem.initial_state
        return Trajectory(np.array([t0]), y[None, :].copy(),
                          np.zeros((0, y.size, 4)) if problem.dense_output else None)
    if isinstance(problem.rhs, CPUDispatcher):
        if problem.guard is not None:
            raise ValueError("guards are not supported for compiled vector fields")
        return _integrate_compiled(problem)
    return _integrate_python(problem)


def _integrate_python(problem):
    rhs = problem.rhs
    params = problem.params
    t0, t1 = problem.t_span
    y = problem.initial_state.copy()
    rtol, atol = problem.rel_tol, problem.abs_tol

    def f(t, state):
        raw = rhs(t, state) if params is None else rhs(t, state, params)
        out = np.asarray(raw, dtype=float)
        if not np.all(np.isfinite(out)):
            raise NonFiniteRhs(t, state.copy())
        return out

    times = [t0]
    states = [y.copy()]
    coeffs = []
    direction = 1.0 if t1 > t0 else -1.0
    fy = f(t0, y)
    h = min(_initial_step(f, t0, y, fy, direction, 4, rtol, atol), abs(t1 - t0), problem.max_step)
    K = np.empty((7, y.size))
    t = t0
    steps = 0
    while direction * (t1 - t) > 0:
        steps += 1
        if steps > problem.max_steps:
            raise StepLimitExceeded(f"max_steps={problem.max_steps} reached at t={t!r}")
        h = min(h, problem.max_step)
        last = h >= abs(t1 - t) * (1 - 1e-14)
        if last:
            h = abs(t1 - t)
        hs = h * direction
        K[0] = fy
        for s in range(1, 6):
            K[s] = f(t + _C[s] * hs, y + hs * (_A[s] @ K[:s]))
        y_new = y + hs * (_B @ K[:6])
        t_new = t1 if last else t + hs
        K[6] = f(t_new, y_new)
        err = hs * (_E @ K)
        scale = atol + rtol * np.maximum(np.abs(y), np.abs(y_new))
        err_norm = float(np.max(np.abs(err) / scale))
        if err_norm <= 1.0:
            if problem.dense_output:
                coeffs.append(hs * (K.T @ _P))
            t, y, fy = t_new, y_new, K[6].copy()
            times.append(t)
            states.append(y.copy())
            norm = float(np.max(np.abs(y)))
            if norm > problem.blowup_bound:
                raise BlowUp(t, norm, problem.blowup_bound)
            if problem.guard is not None:
                problem.guard(t, y)
            factor = _MAX_FACTOR if err_norm == 0 else min(_MAX_FACTOR, _SAFETY * err_norm ** -0.2)
            h *= factor
        else:
            h *= max(_MIN_FACTOR, _SAFETY * err_norm ** -0.2)
            if h < 1e-15 * max(1.0, abs(t)):
                raise StepLimitExceeded(f"step size underflow at t={t!r}")
    return Trajectory(np.array(times), np.array(states),
                      np.array(coeffs) if problem.dense_output else None)


# ---------------------------------------------------------------------------
# compiled path

_STATUS_OK, _STATUS_STEPS, _STATUS_NONFINITE, _STATUS_BLOWUP, _STATUS_UNDERFLOW = range(5)

if numba is not None:
    from numba import types as _nt

    #: signature a compiled vector field must be jitted with: ``rhs(t, y, params) -> dy``
    RHS_SIGNATURE = _nt.float64[::1](_nt.float64, _nt.float64[::1], _nt.float64[::1])
    _RESULT = _nt.Tuple((_nt.int64, _nt.float64, _nt.float64[::1], _nt.float64[::1],
                         _nt.float64[:, ::1], _nt.float64[:, :, ::1]))
    _KERNEL_SIG = _RESULT(_nt.FunctionType(RHS_SIGNATURE), _nt.float64[::1], _nt.float64,
                          _nt.float64, _nt.float64[::1], _nt.float64, _nt.float64, _nt.int64,
                          _nt.float64, _nt.float64, _nt.float64, _nt.boolean)
    _jit = numba.njit
else:  # pragma: no cover
    RHS_SIGNATURE = None
    _KERNEL_SIG = None

    def _jit(*args, **kwargs):
        return lambda fn: fn

_KA = np.zeros((6, 5))
for _s in range(1, 6):
    _KA[_s, :_s] = _A[_s]


@_jit(cache=True)
def _finite(v):
    for x in v:
        if not np.isfinite(x):
            return False
    return True


@_jit(_KERNEL_SIG, cache=True)
def _kernel(rhs, params, t0, t1, y0, rtol, atol, max_steps, max_step, bound, h0, dense):
    n = y0.size
    cap = 1024
    times = np.empty(cap)
    states = np.empty((cap, n))
    coeffs = np.empty((cap if dense else 1, n, 4))
    times[0] = t0
    states[0] = y0
    count = 1
    status = _STATUS_OK
    direction = 1.0 if t1 > t0 else -1.0
    y = y0.copy()
    t = t0
    K = np.empty((7, n))
    ytmp = np.empty(n)
    fy = rhs(t0, y, params)
    if not _finite(fy):
        status = _STATUS_NONFINITE
    h = min(h0, abs(t1 - t0), max_step)
    steps = 0
    while status == _STATUS_OK and direction * (t1 - t) > 0:
        steps += 1
        if steps > max_steps:
            status = _STATUS_STEPS
            break
        h = min(h, max_step)
        last = h >= abs(t1 - t) * (1 - 1e-14)
        if last:
            h = abs(t1 - t)
        hs = h * direction
        K[0] = fy
        for s in range(1, 6):
            for i in range(n):
                acc = 0.0
                for j in range(s):
                    acc += _KA[s, j] * K[j, i]
                ytmp[i] = y[i] + hs * acc
            K[s] = rhs(t + _C[s] * hs, ytmp, params)
            if not _finite(K[s]):
                status = _STATUS_NONFINITE
                t = t + _C[s] * hs
                y = ytmp.copy()
                break
        if status != _STATUS_OK:
            break
        y_new = np.empty(n)
        for i in range(n):
            acc = 0.0
            for j in range(6):
                acc += _B[j] * K[j, i]
            y_new[i] = y[i] + hs * acc
        t_new = t1 if last else t + hs
        K[6] = rhs(t_new, y_new, params)
        if not _finite(K[6]):
            status = _STATUS_NONFINITE
            t = t_new
            y = y_new
            break
        err_norm = 0.0
        for i in range(n):
            acc = 0.0
            for j in range(7):
                acc += _E[j] * K[j, i]
            e = abs(hs * acc) / (atol + rtol * max(abs(y[i]), abs(y_new[i])))
            if e > err_norm:
                err_norm = e
        if err_norm <= 1.0:
            if count == times.size:
                cap *= 2
                nt = np.empty(cap)
                nt[:count] = times[:count]
                times = nt
                ns = np.empty((cap, n))
                ns[:count] = states[:count]
                states = ns
                if dense:
                    nc = np.empty((cap, n, 4))
                    nc[:count - 1] = coeffs[:count - 1]
                    coeffs = nc
            if dense:
                for i in range(n):
                    for k in range(4):
                        acc = 0.0
                        for j in range(7):
                            acc += K[j, i] * _P[j, k]
                        coeffs[count - 1, i, k] = hs * acc
            t = t_new
            y = y_new
            fy = K[6].copy()
            times[count] = t
            states[count] = y
            count += 1
            norm = 0.0
            for i in range(n):
                norm = max(norm, abs(y[i]))
            if norm > bound:
                status = _STATUS_BLOWUP
                break
            if err_norm == 0.0:
                h *= _MAX_FACTOR
            else:
                h *= min(_MAX_FACTOR, _SAFETY * err_norm ** -0.2)
        else:
            h *= max(_MIN_FACTOR, _SAFETY * err_norm ** -0.2)
            if h < 1e-15 * max(1.0, abs(t)):
                status = _STATUS_UNDERFLOW
    nc = max(count - 1, 0) if dense else 0
    return (status, t, y, times[:count].copy(), states[:count].copy(), coeffs[:nc].copy())


def _integrate_compiled(problem):
    rhs = problem.rhs
    params = np.ascontiguousarray(problem.params if problem.params is not None else np.zeros(0),
                                  dtype=float)
    t0, t1 = problem.t_span
    y0 = np.ascontiguousarray(problem.initial_state)
    direction = 1.0 if t1 > t0 else -1.0
    f0 = rhs(t0, y0, params)
    h0 = _initial_step(lambda t, y: rhs(t, np.ascontiguousarray(y), params), t0, y0, f0,
                       direction, 4, problem.rel_tol, problem.abs_tol)
    status, t, y, times, states, coeffs = _kernel(
        rhs, params, t0, t1, y0, problem.rel_tol, problem.abs_tol, problem.max_steps,
        min(problem.max_step, 1e308), problem.blowup_bound, h0, problem.dense_output)
    if status == _STATUS_STEPS:
        raise StepLimitExceeded(f"max_steps={problem.max_steps} reached at t={t!r}")
    if status == _STATUS_NONFINITE:
        raise NonFiniteRhs(t, y)
    if status == _STATUS_BLOWUP:
        raise BlowUp(t, float(np.max(np.abs(y))), problem.blowup_bound)
    if status == _STATUS_UNDERFLOW:
        raise StepLimitExceeded(f"step size underflow at t={t!r}")
    return Trajectory(times, states, coeffs if problem.dense_output else None)
