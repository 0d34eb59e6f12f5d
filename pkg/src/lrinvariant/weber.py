"""Parity-resolved solutions of phi'' + (z^2/4 + eps) phi = 0.

The basis is fixed by data at the origin: the even solution has
(phi, phi') = (1, 0), the odd one (0, 1), so their Wronskian is identically 1.
Tables hold values and derivatives on a symmetric uniform grid; in between
nodes they are interpolated with quintic Hermite polynomials, using the
equation itself for the second derivative.

In terms of the standard real parabolic cylinder functions W(a, x) with
a = -eps (DLMF 12.14):

    even(z) = [W(a, z) + W(a, -z)] / (2 W(a, 0))
    odd(z)  = [W(a, z) - W(a, -z)] / (2 W'(a, 0))
"""
from __future__ import annotations

import math
import threading
from collections import OrderedDict
from dataclasses import dataclass

import numba
import numpy as np
from scipy.special import loggamma

from .errors import OutOfRange, ResolutionTooCoarse
from .ode import RHS_SIGNATURE, IntegrationProblem, integrate

# below the turning point |z| = 2 sqrt(-eps) the solutions grow like exp(pi |eps| / 2),
# so the generic runaway guard is far too tight here
WEBER_BLOWUP_BOUND = 1e250


@numba.njit(RHS_SIGNATURE, cache=True)
def _weber_rhs(z, y, eps):
    # state: (even, even', odd, odd') for every eps, concatenated
    out = np.empty_like(y)
    zz = 0.25 * z * z
    for j in range(eps.size):
        k2 = zz + eps[j]
        b = 4 * j
        out[b] = y[b + 1]
        out[b + 1] = -k2 * y[b]
        out[b + 2] = y[b + 3]
        out[b + 3] = -k2 * y[b + 2]
    return out


def max_spacing(z_max: float, epsilon: float) -> float:
    """Coarsest grid spacing accepted for a table reaching ``z_max``."""
    return 0.25 / max(1.0, z_max / 2.0 + math.sqrt(abs(epsilon)))


def symmetric_grid(z_max: float, n_points: int) -> np.ndarray:
    """Uniform grid on [-z_max, z_max] that is exactly symmetric and contains 0."""
    half = n_points // 2
    pos = z_max * (np.arange(half + 1) / half)
    return np.concatenate([-pos[:0:-1], pos])


@dataclass(frozen=True, eq=False)
class EigenfunctionTable:
    epsilon: float
    z_grid: np.ndarray
    even_values: np.ndarray
    even_derivs: np.ndarray
    odd_values: np.ndarray
    odd_derivs: np.ndarray

    @property
    def z_max(self) -> float:
        return float(self.z_grid[-1])

    @property
    def spacing(self) -> float:
        return float(self.z_grid[1] - self.z_grid[0])

    def wronskian(self) -> np.ndarray:
        return self.even_values * self.odd_derivs - self.even_derivs * self.odd_values

    def interpolate(self, z):
        """Even and odd branch values at arbitrary ``|z| <= z_max``."""
        z = np.asarray(z, dtype=float)
        az = np.abs(z)
        if np.any(az > self.z_max * (1 + 1e-14)):
            raise OutOfRange(f"|z| up to {az.max():.6g} exceeds table range {self.z_max:.6g}")
        half = self.z_grid.size // 2
        zp = self.z_grid[half:]
        h = zp[1] - zp[0]
        idx = np.minimum((az / h).astype(np.int64), zp.size - 2)
        s = (az - zp[idx]) / h
        k2l = 0.25 * zp[idx] ** 2 + self.epsilon
        k2r = 0.25 * zp[idx + 1] ** 2 + self.epsilon
        s2 = s * s
        s3 = s2 * s
        s4 = s3 * s
        s5 = s4 * s
        h0 = 1 - 10 * s3 + 15 * s4 - 6 * s5
        h1 = (s - 6 * s3 + 8 * s4 - 3 * s5) * h
        h2 = 0.5 * (s2 - 3 * s3 + 3 * s4 - s5) * h * h
        h3 = 10 * s3 - 15 * s4 + 6 * s5
        h4 = (-4 * s3 + 7 * s4 - 3 * s5) * h
        h5 = 0.5 * (s3 - 2 * s4 + s5) * h * h

        def branch(values, derivs):
            v = values[half:]
            d = derivs[half:]
            fl, fr = v[idx], v[idx + 1]
            return (h0 * fl + h1 * d[idx] - h2 * k2l * fl
                    + h3 * fr + h4 * d[idx + 1] - h5 * k2r * fr)

        even = branch(self.even_values, self.even_derivs)
        odd = np.where(z < 0, -1.0, 1.0) * branch(self.odd_values, self.odd_derivs)
        return even, odd


def _check_resolution(epsilon, z_max, n_points):
    if n_points < 5 or n_points % 2 == 0:
        raise ResolutionTooCoarse(f"n_points must be odd and >= 5, got {n_points}")
    if not z_max > 0:
        raise ValueError("z_max must be positive")
    h = 2.0 * z_max / (n_points - 1)
    limit = max_spacing(z_max, epsilon)
    if h > limit * (1 + 1e-12):
        raise ResolutionTooCoarse(
            f"spacing {h:.4g} exceeds {limit:.4g} for eps={epsilon}, z_max={z_max}")


def build_eigenfunction_tables(epsilons, z_max: float, n_points: int, tol: float = 1e-13,
                               max_steps: int = 10_000_000):
    """Build tables for several spectral values in one integration.

    All tables share the grid; the step size is set by the hardest value.
    """
    eps = np.ascontiguousarray(np.atleast_1d(np.asarray(epsilons, dtype=float)))
    for e in eps:
        _check_resolution(float(e), z_max, n_points)
    z = symmetric_grid(z_max, n_points)
    half = n_points // 2
    y0 = np.tile([1.0, 0.0, 0.0, 1.0], eps.size)
    traj = integrate(IntegrationProblem(_weber_rhs, y0, (0.0, z_max), rel_tol=tol,
                                        abs_tol=max(tol * 1e-1, 1e-14), max_steps=max_steps,
                                        params=eps, blowup_bound=WEBER_BLOWUP_BOUND))
    pos = traj(z[half:])
    pos[0] = y0
    # the last node is an integration step end; use the step state exactly
    pos[-1] = traj.states[-1]
    sign = np.concatenate([-np.ones(half), np.ones(half + 1)])
    tables = []
    for j, e in enumerate(eps):
        b = 4 * j
        ev, ed, ov, od = (pos[:, b + k] for k in range(4))
        tables.append(EigenfunctionTable(
            epsilon=float(e),
            z_grid=z,
            even_values=np.concatenate([ev[:0:-1], ev]),
            even_derivs=np.concatenate([ed[:0:-1], ed]) * sign,
            odd_values=np.concatenate([ov[:0:-1], ov]) * sign,
            odd_derivs=np.concatenate([od[:0:-1], od]),
        ))
    return tables


def build_eigenfunction_table(epsilon: float, z_max: float, n_points: int,
                              tol: float = 1e-13) -> EigenfunctionTable:
    """Integrate outward from z = 0 and fill z < 0 by parity."""
    return build_eigenfunction_tables([epsilon], z_max, n_points, tol)[0]


def eval_varphi(table: EigenfunctionTable, z, parity_mix=(1.0, 0.0)):
    """c_even * even(z) + c_odd * odd(z)."""
    even, odd = table.interpolate(z)
    c_even, c_odd = parity_mix
    out = c_even * even + c_odd * odd
    return complex(out) if np.ndim(out) == 0 else out


class TableCache:
    """Bounded cache of tables keyed by (eps, z_max, n_points, tol).

    Builds run outside the lock; two threads racing on one key may both
    build, and the first stored table wins.
    """

    def __init__(self, max_entries: int = 512):
        self._lock = threading.Lock()
        self._tables: OrderedDict = OrderedDict()
        self.max_entries = max_entries

    def get(self, epsilon, z_max, n_points, tol=1e-13):
        key = (float(epsilon), float(z_max), int(n_points), float(tol))
        with self._lock:
            table = self._tables.get(key)
            if table is not None:
                self._tables.move_to_end(key)
                return table
        table = build_eigenfunction_table(epsilon, z_max, n_points, tol)
        return self._store(key, table)

    def get_many(self, epsilons, z_max, n_points, tol=1e-13):
        keys = [(float(e), float(z_max), int(n_points), float(tol)) for e in epsilons]
        with self._lock:
            missing = sorted({k[0] for k in keys if k not in self._tables})
        if missing:
            for e, table in zip(missing, build_eigenfunction_tables(missing, z_max, n_points, tol)):
                self._store((e, float(z_max), int(n_points), float(tol)), table)
        with self._lock:
            return [self._tables[k] for k in keys]

    def _store(self, key, table):
        with self._lock:
            table = self._tables.setdefault(key, table)
            self._tables.move_to_end(key)
            while len(self._tables) > self.max_entries:
                self._tables.popitem(last=False)
            return table

    def clear(self):
        with self._lock:
            self._tables.clear()


CACHE = TableCache()


# ---------------------------------------------------------------------------
# continuum normalization

def _log_w0_sq(a):
    # log W(a,0)^2 = -3/2 log 2 + Re[lnG(1/4 + ia/2) - lnG(3/4 + ia/2)]
    r = loggamma(0.25 + 0.5j * a) - loggamma(0.75 + 0.5j * a)
    return -1.5 * math.log(2.0) + np.real(r)


def asymptotic_amplitude_sq(epsilon):
    """Squared large-|z| amplitudes (A_even^2, A_odd^2).

    Each branch behaves as A |z|^(-1/2) cos(z^2/4 + eps ln|z| + const) far out.
    """
    a = -np.asarray(epsilon, dtype=float)
    log_w0 = _log_w0_sq(a)
    # W'(a,0)^2 W(a,0)^2 = 1/4
    log_w1 = -2 * math.log(2.0) - log_w0
    log_root = 0.5 * np.logaddexp(0.0, 2 * np.pi * a)
    return np.exp(log_root - log_w0), np.exp(log_root - log_w1)


def asymptotic_amplitude_sq_numeric(table: EigenfunctionTable, z_fit: float | None = None):
    """Estimate of the squared amplitudes from the table's far end.

    Uses the adiabatic invariant k phi^2 + phi'^2 / k with k = sqrt(z^2/4 + eps),
    extrapolated in 1/z^2 from two radii.
    """
    z_fit = table.z_max if z_fit is None else z_fit
    half = table.z_grid.size // 2
    zp = table.z_grid[half:]
    out = []
    for values, derivs in ((table.even_values, table.even_derivs),
                           (table.odd_values, table.odd_derivs)):
        v, d = values[half:], derivs[half:]
        k = np.sqrt(0.25 * zp ** 2 + table.epsilon)

        def invariant_mean(z_hi):
            # average over the last few oscillations to wash out the cos(2 theta) ripple
            sel = (zp <= z_hi) & (zp >= z_hi - 40.0 / max(z_hi, 1.0))
            inv = k[sel] * v[sel] ** 2 + d[sel] ** 2 / k[sel]
            return float(np.mean(inv)), float(np.mean(zp[sel]))

        e1, z1 = invariant_mean(z_fit)
        e2, z2 = invariant_mean(0.5 * z_fit)
        # E(z) ~ E_inf + c / z^2
        e_inf = (e1 * z1 ** 2 - e2 * z2 ** 2) / (z1 ** 2 - z2 ** 2)
        out.append(2.0 * e_inf)
    return tuple(out)


def z_normalization(epsilon):
    """pi A^2 for each parity: <phi_eps | phi_eps'> = pi A^2 delta(eps - eps')."""
    ae, ao = asymptotic_amplitude_sq(epsilon)
    return np.pi * ae, np.pi * ao
