"""Finite-difference Hamiltonian, invariant and gauge map on a uniform q-grid.

All operators close the stencils with zero ghost values outside the grid, so
their matrices are exactly Hermitian for the grid inner product; frames are
expected to vanish at both ends anyway.

The squared bracket of the invariant is built as A^dagger A with a
gauge-covariant forward difference (link phases between neighbouring nodes),
so that conjugating by the quadratic-phase map reproduces the scaled static
operator node for node.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import BoundaryLeak
from .params import OscillatorModel

BOUNDARY_TOL = 1e-8
INTERIOR_FRACTION = 0.8


@dataclass(frozen=True)
class GridSpec:
    q_min: float
    q_max: float
    n_points: int

    def __post_init__(self):
        if not self.q_min < self.q_max:
            raise ValueError("q_min must be < q_max")
        if self.n_points < 16:
            raise ValueError("n_points must be >= 16")

    @property
    def spacing(self) -> float:
        return (self.q_max - self.q_min) / (self.n_points - 1)

    @property
    def nodes(self) -> np.ndarray:
        q = self.q_min + self.spacing * np.arange(self.n_points)
        q[-1] = self.q_max
        return q

    def interior(self) -> slice:
        """Index range of the central 80% of the grid."""
        edge = int(round(0.5 * (1 - INTERIOR_FRACTION) * self.n_points))
        return slice(edge, self.n_points - edge)

    def inner(self, f, g) -> complex:
        """<f|g> on the grid."""
        return complex(np.vdot(f, g) * self.spacing)

    def norm(self, f, interior=False) -> float:
        sl = self.interior() if interior else slice(None)
        return float(np.sqrt(np.sum(np.abs(f[sl]) ** 2) * self.spacing))


@dataclass(frozen=True, eq=False)
class WavefunctionFrame:
    grid: GridSpec
    t: float
    values: np.ndarray
    normalized: bool = False
    label: str = field(default="", compare=False)

    def __post_init__(self):
        v = np.asarray(self.values, dtype=complex)
        if v.shape != (self.grid.n_points,):
            raise ValueError("frame values do not match the grid")
        if not np.all(np.isfinite(v)):
            raise ValueError("frame values must be finite")
        object.__setattr__(self, "values", v)

    def replace(self, values, **changes) -> "WavefunctionFrame":
        kw = dict(grid=self.grid, t=self.t, values=values, normalized=False, label=self.label)
        kw.update(changes)
        return WavefunctionFrame(**kw)

    def norm(self, interior=False) -> float:
        return self.grid.norm(self.values, interior)

    def normalize(self) -> "WavefunctionFrame":
        return self.replace(self.values / self.norm(), normalized=True)


def boundary_magnitude(values) -> float:
    peak = float(np.max(np.abs(values))) if values.size else 0.0
    if peak == 0.0:
        return 0.0
    return max(abs(values[0]), abs(values[-1])) / peak


def check_boundary(frame: WavefunctionFrame, tol=BOUNDARY_TOL):
    mag = boundary_magnitude(frame.values)
    if mag > tol:
        raise BoundaryLeak(mag, frame.t)


def _d2(v, h):
    out = -2.0 * v
    out[1:] += v[:-1]
    out[:-1] += v[1:]
    return out / (h * h)


def _d1(v, h):
    out = np.zeros_like(v)
    out[1:] -= v[:-1]
    out[:-1] += v[1:]
    return out / (2 * h)


def hamiltonian_bands(model: OscillatorModel, grid: GridSpec, t: float):
    """(lower, diag, upper) bands of the tridiagonal grid Hamiltonian at time t.

    lower[j] couples node j+1 to node j, upper[j] couples node j to node j+1.
    """
    hbar = model.hbar
    q = grid.nodes
    h = grid.spacing
    m = model.mass(t)
    kin = hbar * hbar / (2.0 * m * h * h)
    diag = (2.0 * kin - 0.5 * m * model.omega_sq(t) * q * q).astype(complex)
    upper = np.full(q.size - 1, -kin, dtype=complex)
    lower = upper.copy()
    if model.y_fn is not None:
        # symmetrized y (pq + qp)/2 = -i hbar y/2 (Q D1 + D1 Q)
        c = -0.5j * hbar * model.y(t) / (2.0 * h)
        s = q[:-1] + q[1:]
        upper = upper + c * s
        lower = lower - c * s
    return lower, diag, upper


def apply_bands(bands, v):
    lower, diag, upper = bands
    out = diag * v
    out[:-1] += upper * v[1:]
    out[1:] += lower * v[:-1]
    return out


def apply_hamiltonian(model: OscillatorModel, frame: WavefunctionFrame,
                      boundary_tol=BOUNDARY_TOL) -> WavefunctionFrame:
    """H psi with H = -hbar^2/(2M) D2 - M omega^2 q^2/2 - i hbar y/2 (q D1 + D1 q)."""
    if boundary_tol is not None:
        check_boundary(frame, boundary_tol)
    return frame.replace(apply_bands(hamiltonian_bands(model, frame.grid, frame.t), frame.values))


def gauge_coefficient(model: OscillatorModel, ermakov, t: float) -> float:
    """a(t) = M (rho' - y rho) / (2 hbar rho), so U = exp(-i a q^2)."""
    rho, rho_dot = ermakov.rho(t), ermakov.rho_dot(t)
    m = model.mass(t)
    if model.y_fn is None:
        return m * rho_dot / (2.0 * model.hbar * rho)
    return m * (rho_dot - model.y(t) * rho) / (2.0 * model.hbar * rho)


def gauge_phase(model, ermakov, q, t, sign=1.0):
    """exp(-i sign a q^2); sign=+1 is U, sign=-1 its inverse."""
    return np.exp(-1j * sign * gauge_coefficient(model, ermakov, t) * q * q)


def gauge_transform(direction: str, model: OscillatorModel, ermakov,
                    frame: WavefunctionFrame) -> WavefunctionFrame:
    if direction not in ("forward", "inverse"):
        raise ValueError("direction must be 'forward' or 'inverse'")
    sign = 1.0 if direction == "forward" else -1.0
    return frame.replace(frame.values * gauge_phase(model, ermakov, frame.grid.nodes, frame.t, sign),
                         normalized=frame.normalized)


class _CovariantBracket:
    """A = rho p - M (rho' - y rho) q as a node-to-edge covariant difference.

    Edge k sits between nodes k-1 and k (k = 0..n), with zero ghosts at both
    ends.  A = V (-i hbar rho D+) U where U is the gauge phase on nodes and V
    its midpoint value on edges, so that A^dagger A = U^dagger (-hbar^2 rho^2 D2) U.
    """

    def __init__(self, model, ermakov, grid, t, gauge_sign=1.0):
        q = grid.nodes
        h = grid.spacing
        a = gauge_sign * gauge_coefficient(model, ermakov, t)
        self.u = np.exp(-1j * a * q * q)
        mid = np.concatenate([[q[0] - 0.5 * h], 0.5 * (q[:-1] + q[1:]), [q[-1] + 0.5 * h]])
        self.v = np.exp(1j * a * mid * mid)
        self.c = -1j * model.hbar * ermakov.rho(t) / h

    def apply(self, psi):
        w = self.u * psi
        e = np.empty(psi.size + 1, dtype=complex)
        e[0] = w[0]
        e[1:-1] = w[1:] - w[:-1]
        e[-1] = -w[-1]
        return self.c * self.v * e

    def apply_adjoint(self, e):
        g = np.conj(self.c * self.v) * e
        return np.conj(self.u) * (g[:-1] - g[1:])


def apply_invariant(model: OscillatorModel, ermakov, frame: WavefunctionFrame,
                    boundary_tol=BOUNDARY_TOL, gauge_sign=1.0) -> WavefunctionFrame:
    """I psi = (1/2) [ -(q/rho)^2 psi + A^dagger A psi ]."""
    if boundary_tol is not None:
        check_boundary(frame, boundary_tol)
    rho = ermakov.rho(frame.t)
    q = frame.grid.nodes
    bracket = _CovariantBracket(model, ermakov, frame.grid, frame.t, gauge_sign)
    psi = frame.values
    out = 0.5 * (bracket.apply_adjoint(bracket.apply(psi)) - (q / rho) ** 2 * psi)
    return frame.replace(out)


def apply_transformed_invariant(ermakov, frame: WavefunctionFrame,
                                boundary_tol=BOUNDARY_TOL) -> WavefunctionFrame:
    """I' psi = -hbar^2 rho^2 / 2 D2 psi - (q/rho)^2 psi / 2."""
    if boundary_tol is not None:
        check_boundary(frame, boundary_tol)
    hbar = ermakov.model.hbar
    rho = ermakov.rho(frame.t)
    q = frame.grid.nodes
    psi = frame.values
    out = -0.5 * hbar * hbar * rho * rho * _d2(psi, frame.grid.spacing) - 0.5 * (q / rho) ** 2 * psi
    return frame.replace(out)


def momentum_expectation(frame: WavefunctionFrame, hbar=1.0) -> float:
    """<p> with the centered first difference."""
    g = frame.grid
    return float(np.real(g.inner(frame.values, -1j * hbar * _d1(frame.values, g.spacing))))


def position_expectation(frame: WavefunctionFrame) -> float:
    g = frame.grid
    return float(np.real(g.inner(frame.values, g.nodes * frame.values)))
