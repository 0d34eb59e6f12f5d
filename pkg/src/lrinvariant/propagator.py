"""Crank-Nicolson propagation of the Schroedinger equation on the grid.

Each step solves

    (1 + i dt/(2 hbar) H(t + dt/2)) psi_new = (1 - i dt/(2 hbar) H(t + dt/2)) psi_old

with the tridiagonal grid Hamiltonian.  The discrete H is Hermitian, so the
grid norm is conserved up to round-off.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import solve_banded

from .errors import BoundaryLeak, SolveFailure
from .operators import (BOUNDARY_TOL, GridSpec, WavefunctionFrame, apply_bands,
                        boundary_magnitude, check_boundary, hamiltonian_bands)
from .params import OscillatorModel


def _step_values(model, grid, psi, t, dt):
    lower, diag, upper = hamiltonian_bands(model, grid, t + 0.5 * dt)
    tau = 0.5j * dt / model.hbar
    rhs = psi - tau * apply_bands((lower, diag, upper), psi)
    ab = np.zeros((3, grid.n_points), dtype=complex)
    ab[0, 1:] = tau * upper
    ab[1] = 1.0 + tau * diag
    ab[2, :-1] = tau * lower
    try:
        out = solve_banded((1, 1), ab, rhs, check_finite=False)
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise SolveFailure(f"Crank-Nicolson system singular at t={t}: {exc}") from exc
    if not np.all(np.isfinite(out)):
        raise SolveFailure(f"non-finite Crank-Nicolson solution at t={t}")
    return out


def cn_step(model: OscillatorModel, frame: WavefunctionFrame, dt: float,
            boundary_tol=BOUNDARY_TOL) -> WavefunctionFrame:
    """One Crank-Nicolson step with the Hamiltonian at the midpoint time."""
    if boundary_tol is not None:
        check_boundary(frame, boundary_tol)
    out = _step_values(model, frame.grid, frame.values, frame.t, dt)
    return frame.replace(out, t=frame.t + dt, normalized=frame.normalized)


def recommended_q_max(q0: float, omega1: float, t_final: float, safety: float = 3.0) -> float:
    """Half-width that keeps a packet of size q0 inside the box up to t_final."""
    return q0 * math.exp(abs(omega1) * t_final) * safety


@dataclass(eq=False)
class PropagationRun:
    model: OscillatorModel
    grid: GridSpec
    dt: float
    frames: list = field(default_factory=list)
    norm_history: np.ndarray = field(default_factory=lambda: np.zeros(0))
    norm_times: np.ndarray = field(default_factory=lambda: np.zeros(0))

    @property
    def times(self) -> np.ndarray:
        return np.array([f.t for f in self.frames])

    @property
    def final(self) -> WavefunctionFrame:
        return self.frames[-1]

    def norm_drift(self) -> float:
        return float(np.max(np.abs(self.norm_history / self.norm_history[0] - 1.0)))


def propagate(model: OscillatorModel, initial: WavefunctionFrame, t_final: float, dt: float,
              stride: int = 1, boundary_tol=BOUNDARY_TOL) -> PropagationRun:
    """Step from ``initial.t`` to ``t_final``; keeps every ``stride``-th frame and the last.

    The boundary check runs before every step, so a leak aborts the run with
    the time at which it first appeared.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    span = t_final - initial.t
    n_steps = int(round(span / dt))
    if n_steps < 0 or abs(n_steps * dt - span) > 1e-9 * max(1.0, abs(span)):
        raise ValueError(f"t_final - t0 = {span} is not a multiple of dt = {dt}")
    grid = initial.grid
    psi = initial.values.copy()
    frames = [initial]
    norms = np.empty(n_steps + 1)
    norms[0] = grid.norm(psi)
    t0 = initial.t
    for k in range(n_steps):
        t = t0 + k * dt
        if boundary_tol is not None:
            mag = boundary_magnitude(psi)
            if mag > boundary_tol:
                raise BoundaryLeak(mag, t)
        psi = _step_values(model, grid, psi, t, dt)
        norms[k + 1] = grid.norm(psi)
        if (k + 1) % stride == 0 or k + 1 == n_steps:
            frames.append(WavefunctionFrame(grid, t0 + (k + 1) * dt, psi.copy(),
                                            normalized=initial.normalized))
    return PropagationRun(model, grid, dt, frames, norms, t0 + dt * np.arange(n_steps + 1))


def richardson_ratio(errors) -> float:
    """e(dt) / e(dt/2) for a sequence of errors at successively halved steps."""
    errors = list(errors)
    return errors[-2] / errors[-1]
