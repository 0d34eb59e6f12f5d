"""The auxiliary c-number rho(t) of the inverted-oscillator invariant.

rho solves

    rho'' + gamma rho' - Omega^2 rho = -1 / (M^2 rho^3)

and must stay positive; the attractive right-hand side can drive it to zero in
finite time, which is reported as :class:`RhoCollapse`.
"""
from __future__ import annotations

import math

import numpy as np

from .errors import NonpositiveOmega1Sq, OutOfWindow, RhoCollapse
from .ode import IntegrationProblem, integrate
from .params import (CaldirolaKanaiParams, OscillatorModel, eval_gamma,
                     eval_modified_frequency_sq, make_caldirola_kanai)

RHO_FLOOR = 1e-8


class ErmakovSolution:
    """rho(t) and its derivatives on a closed time window.

    Built either from a numerical trajectory over the state (rho, rho') or from
    the closed form of the exponential-mass family.
    """

    def __init__(self, model: OscillatorModel, window, trajectory=None, ck=None,
                 rho_floor=RHO_FLOOR):
        if (trajectory is None) == (ck is None):
            raise ValueError("give exactly one of trajectory or ck")
        self.model = model
        self.window = (float(window[0]), float(window[1]))
        self.trajectory = trajectory
        self.ck = ck
        self.rho_floor = rho_floor

    @classmethod
    def closed_form(cls, ck: CaldirolaKanaiParams, model: OscillatorModel | None = None,
                    window=(-math.inf, math.inf)):
        if ck.omega1_sq <= 0:
            raise NonpositiveOmega1Sq(f"Omega1^2 = {ck.omega1_sq} <= 0")
        if model is None:
            model = make_caldirola_kanai(ck)
        return cls(model, window, ck=ck)

    def _check(self, t):
        ta = np.asarray(t, dtype=float)
        lo, hi = self.window
        if np.any(ta < lo) or np.any(ta > hi) or np.any(np.isnan(ta)):
            raise OutOfWindow(f"t={t!r} outside rho window [{lo}, {hi}]")
        return ta

    def _state(self, t):
        self._check(t)
        if self.ck is not None:
            rho, rho_dot = closed_form_rho_ck(self.ck, t)
            return rho, rho_dot
        s = self.trajectory(t)
        return (s[0], s[1]) if np.ndim(t) == 0 else (s[:, 0], s[:, 1])

    def rho(self, t):
        return self._state(t)[0]

    def rho_dot(self, t):
        return self._state(t)[1]

    def rho_ddot(self, t):
        """Second derivative, taken from the interpolant (not from the equation)."""
        self._check(t)
        if self.ck is not None:
            g = self.ck.gamma
            return g * g / 4.0 * closed_form_rho_ck(self.ck, t)[0]
        d = self.trajectory.derivative(t)
        return d[1] if np.ndim(t) == 0 else d[:, 1]

    def scaled_residual(self, t):
        """|residual| / (1 + |Omega^2 rho| + 1/(M^2 rho^3)) at ``t``."""
        rho, rho_dot = self._state(t)
        r = ermakov_residual(self.model, rho, rho_dot, self.rho_ddot(t), t)
        m = self.model.mass(t)
        return np.abs(r) / (1 + np.abs(eval_modified_frequency_sq(self.model, t) * rho)
                            + 1.0 / (m * m * rho ** 3))

    def max_scaled_residual(self, n_samples=64, seed=0):
        lo, hi = self.window
        if not (math.isfinite(lo) and math.isfinite(hi)):
            lo, hi = 0.0, 1.0
        ts = np.random.default_rng(seed).uniform(lo, hi, n_samples)
        return float(np.max(self.scaled_residual(ts)))


def ermakov_residual(model: OscillatorModel, rho, rho_dot, rho_ddot, t):
    """rho'' + gamma rho' - Omega^2 rho + 1/(M^2 rho^3); zero on exact solutions."""
    m = model.mass(t)
    return (rho_ddot + eval_gamma(model, t) * rho_dot
            - eval_modified_frequency_sq(model, t) * rho + 1.0 / (m * m * rho ** 3))


def closed_form_rho_ck(ck: CaldirolaKanaiParams, t):
    """Particular solution (m Omega1)^(-1/2) exp(-gamma t / 2) and its derivative."""
    w1sq = ck.omega1_sq
    if w1sq <= 0:
        raise NonpositiveOmega1Sq(f"Omega1^2 = {w1sq} <= 0; use solve_rho instead")
    rho = np.exp(-0.5 * ck.gamma * np.asarray(t, dtype=float)) / math.sqrt(ck.m * math.sqrt(w1sq))
    rho_dot = -0.5 * ck.gamma * rho
    if np.ndim(rho) == 0:
        return float(rho), float(rho_dot)
    return rho, rho_dot


def default_initial_data(model: OscillatorModel, t0: float):
    """Frozen-coefficient seed (M Omega1)^(-1/2), -gamma rho / 2; else (1, 0)."""
    g = eval_gamma(model, t0)
    w1sq = eval_modified_frequency_sq(model, t0) + g * g / 4.0
    if w1sq > 0:
        rho0 = 1.0 / math.sqrt(model.mass(t0) * math.sqrt(w1sq))
        return rho0, -0.5 * g * rho0
    return 1.0, 0.0


def solve_rho(model: OscillatorModel, rho0=None, rho_dot0=None, t_span=None, tol=1e-12,
              rho_floor=RHO_FLOOR, max_steps=1_000_000) -> ErmakovSolution:
    """Integrate the auxiliary equation from ``t_span[0]`` to ``t_span[1]``.

    Initial data default to :func:`default_initial_data`.  Raises
    :class:`RhoCollapse` if rho reaches ``rho_floor``.
    """
    if t_span is None:
        t_span = model.window
    t0, t1 = (float(v) for v in t_span)
    if not (math.isfinite(t0) and math.isfinite(t1)):
        raise ValueError("t_span must be finite")
    model.check_time([t0, t1])
    if rho0 is None:
        rho0, seed_dot = default_initial_data(model, t0)
        rho_dot0 = seed_dot if rho_dot0 is None else rho_dot0
    elif rho_dot0 is None:
        rho_dot0 = 0.0
    if not rho0 > 0:
        raise ValueError("rho0 must be positive")

    def rhs(t, s):
        rho, rho_dot = s
        m = model.mass(t)
        acc = (-eval_gamma(model, t) * rho_dot + eval_modified_frequency_sq(model, t) * rho
               - 1.0 / (m * m * rho ** 3))
        return np.array([rho_dot, acc])

    def guard(t, s):
        if s[0] <= rho_floor:
            raise RhoCollapse(t, float(s[0]), rho_floor)

    if rho0 <= rho_floor:
        raise RhoCollapse(t0, rho0, rho_floor)
    traj = integrate(IntegrationProblem(rhs, [rho0, rho_dot0], (t0, t1), rel_tol=tol,
                                        abs_tol=max(tol * 1e-2, 1e-14), max_steps=max_steps,
                                        guard=guard))
    return ErmakovSolution(model, (min(t0, t1), max(t0, t1)), trajectory=traj,
                           rho_floor=rho_floor)
