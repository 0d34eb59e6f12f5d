"""Invariant eigenfunctions, their phases, exact solutions and packets.

For a spectral value lam the invariant eigenfunction at time t is

    phi(q, t) = rho^(-1/2) exp(i a q^2) varphi(sqrt(2/hbar) q / rho, lam/hbar)

with a = M (rho' - y rho) / (2 hbar rho), and the Schroedinger solution is
exp(i alpha(t)) phi with alpha(t) = -(lam/hbar) int_0^t dt' / (M rho^2).
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad

from . import weber
from .errors import NonpositiveOmega1Sq, OutOfWindow, QuadratureFailure
from .operators import GridSpec, WavefunctionFrame, check_boundary, gauge_coefficient
from .params import CaldirolaKanaiParams

# interpolation tables are built this much finer than the minimum resolution
TABLE_SPACING_FACTOR = 0.05
QUAD_TOL = 1e-12


def table_extent(z_needed: float) -> float:
    """Round a required z range up to a coarse ladder so nearby times share tables."""
    return max(8.0, 8.0 * math.ceil(z_needed * (1 + 1e-12) / 8.0))


def table_points(z_max: float, eps_abs_max: float) -> int:
    spacing = TABLE_SPACING_FACTOR / max(1.0, z_max / 2 + math.sqrt(eps_abs_max))
    return 2 * int(math.ceil(z_max / spacing)) + 1


def get_table(epsilon: float, z_needed: float):
    z_max = table_extent(z_needed)
    return weber.CACHE.get(epsilon, z_max, table_points(z_max, abs(epsilon)))


def get_tables(epsilons, z_needed: float):
    z_max = table_extent(z_needed)
    n = table_points(z_max, float(np.max(np.abs(epsilons))))
    return weber.CACHE.get_many(list(epsilons), z_max, n)


def _phase_integral(model, ermakov, t):
    """int_0^t dt' / (M rho^2)."""
    t = float(t)
    if t == 0.0:
        return 0.0
    lo, hi = ermakov.window
    if not (lo <= min(0.0, t) and max(0.0, t) <= hi):
        raise OutOfWindow(f"[0, {t}] not inside rho window {ermakov.window}")
    val, err = quad(lambda s: 1.0 / (model.mass(s) * ermakov.rho(s) ** 2), 0.0, t,
                    epsabs=QUAD_TOL, epsrel=QUAD_TOL, limit=500)
    if not err <= 10 * QUAD_TOL * max(1.0, abs(val)):
        raise QuadratureFailure(f"phase quadrature error estimate {err:.2e} at t={t}")
    return val


def phase_alpha(lam: float, model, ermakov, t: float) -> float:
    if lam == 0:
        return 0.0
    return -(lam / model.hbar) * _phase_integral(model, ermakov, t)


def _z_needed(grid: GridSpec, hbar, rho):
    return math.sqrt(2.0 / hbar) * max(abs(grid.q_min), abs(grid.q_max)) / rho


def _eigen_values(lam, parity_mix, model, ermakov, grid, t, table=None):
    hbar = model.hbar
    rho = float(ermakov.rho(t))
    q = grid.nodes
    if table is None:
        table = get_table(lam / hbar, _z_needed(grid, hbar, rho))
    z = math.sqrt(2.0 / hbar) * q / rho
    varphi = weber.eval_varphi(table, z, parity_mix)
    a = gauge_coefficient(model, ermakov, t)
    return np.exp(1j * a * q * q) * varphi / math.sqrt(rho)


def eigenfunction_frame(lam, parity_mix, model, ermakov, grid: GridSpec, t,
                        table=None) -> WavefunctionFrame:
    """Invariant eigenfunction for eigenvalue ``lam`` (not normalizable)."""
    values = _eigen_values(lam, parity_mix, model, ermakov, grid, t, table)
    return WavefunctionFrame(grid, float(t), values, label=f"phi[lam={lam:g}]")


def exact_solution_frame(lam, parity_mix, model, ermakov, grid: GridSpec, t,
                         table=None) -> WavefunctionFrame:
    alpha = phase_alpha(lam, model, ermakov, t)
    values = np.exp(1j * alpha) * _eigen_values(lam, parity_mix, model, ermakov, grid, t, table)
    return WavefunctionFrame(grid, float(t), values, label=f"psi[lam={lam:g}]")


def ck_solution_frame(lam, parity_mix, ck: CaldirolaKanaiParams, grid: GridSpec, t,
                      hbar: float = 1.0, table=None) -> WavefunctionFrame:
    """Closed-form exact solution for mass m exp(gamma t), constant omega0 and y0."""
    if ck.omega1_sq <= 0:
        raise NonpositiveOmega1Sq(f"Omega1^2 = {ck.omega1_sq} <= 0")
    w1 = ck.omega1
    q = grid.nodes
    scale = math.sqrt(2.0 * ck.m * w1 / hbar) * math.exp(0.5 * ck.gamma * t)
    if table is None:
        table = get_table(lam / hbar, scale * max(abs(grid.q_min), abs(grid.q_max)))
    varphi = weber.eval_varphi(table, scale * q, parity_mix)
    chirp = ck.m * math.exp(ck.gamma * t) * (0.5 * ck.gamma + ck.y0) / (2.0 * hbar)
    values = ((ck.m * w1) ** 0.25 * math.exp(0.25 * ck.gamma * t)
              * np.exp(-1j * lam * w1 * t / hbar) * np.exp(-1j * chirp * q * q) * varphi)
    return WavefunctionFrame(grid, float(t), values, label=f"ck[lam={lam:g}]")


def continuum_norm(lam, hbar: float = 1.0):
    """(N_even, N_odd) with <psi_lam | psi_lam'> = N(lam) delta(lam - lam') on the q line."""
    ze, zo = weber.z_normalization(np.asarray(lam, dtype=float) / hbar)
    factor = hbar * math.sqrt(hbar / 2.0)
    return factor * ze, factor * zo


def gauss_legendre(lam_min: float, lam_max: float, n: int):
    x, w = np.polynomial.legendre.leggauss(n)
    half = 0.5 * (lam_max - lam_min)
    return lam_min + half * (x + 1.0), half * w


@dataclass(frozen=True, eq=False)
class PacketSpec:
    """Quadrature representation of a packet: psi = sum_i w_i (c_e psi_e + c_o psi_o).

    The coefficients already carry the continuum normalization, so the
    superposition reproduces the source frame as the quadrature converges.
    ``tail_estimate`` is the largest endpoint |c| relative to the peak |c|.
    """

    lambda_nodes: np.ndarray
    lambda_weights: np.ndarray
    c_even: np.ndarray
    c_odd: np.ndarray
    tail_estimate: float = 0.0

    def __post_init__(self):
        nodes = np.asarray(self.lambda_nodes, dtype=float)
        if nodes.size > 1 and np.any(np.diff(nodes) <= 0):
            raise ValueError("lambda nodes must be strictly increasing")
        for name in ("lambda_nodes", "lambda_weights"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=float))
        for name in ("c_even", "c_odd"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=complex))

    @property
    def weight_norm(self) -> float:
        """sum of w |c|^2 over both channels."""
        return float(np.sum(self.lambda_weights * (np.abs(self.c_even) ** 2 + np.abs(self.c_odd) ** 2)))


def packet_weights(initial_frame: WavefunctionFrame, lambda_nodes, model, ermakov,
                   grid: GridSpec | None = None, lambda_weights=None,
                   boundary_tol=1e-8) -> PacketSpec:
    """Overlaps <psi_lam(., 0) | f> / N(lam) for both parity channels."""
    grid = initial_frame.grid if grid is None else grid
    if initial_frame.t != 0.0:
        raise ValueError("the initial frame must be at t = 0")
    if boundary_tol is not None:
        check_boundary(initial_frame, boundary_tol)
    nodes = np.asarray(lambda_nodes, dtype=float)
    weights = np.ones_like(nodes) if lambda_weights is None else np.asarray(lambda_weights, float)
    hbar = model.hbar
    tables = get_tables(nodes / hbar, _z_needed(grid, hbar, float(ermakov.rho(0.0))))
    n_even, n_odd = continuum_norm(nodes, hbar)
    f = initial_frame.values
    c_even = np.empty(nodes.size, dtype=complex)
    c_odd = np.empty(nodes.size, dtype=complex)
    for i, (lam, table) in enumerate(zip(nodes, tables)):
        pe = exact_solution_frame(lam, (1.0, 0.0), model, ermakov, grid, 0.0, table).values
        po = exact_solution_frame(lam, (0.0, 1.0), model, ermakov, grid, 0.0, table).values
        c_even[i] = grid.inner(pe, f) / n_even[i]
        c_odd[i] = grid.inner(po, f) / n_odd[i]
    mags = np.maximum(np.abs(c_even), np.abs(c_odd))
    peak = float(mags.max()) if mags.size else 0.0
    tail = float(max(mags[0], mags[-1]) / peak) if peak > 0 else 0.0
    return PacketSpec(nodes, weights, c_even, c_odd, tail)


def synthesize_packet(spec: PacketSpec, model, ermakov, grid: GridSpec, t,
                      workers: int = 1) -> WavefunctionFrame:
    """Quadrature sum of exact solutions at time t (fixed summation order)."""
    hbar = model.hbar
    rho = float(ermakov.rho(t))
    tables = get_tables(spec.lambda_nodes / hbar, _z_needed(grid, hbar, rho))
    integral = _phase_integral(model, ermakov, t)

    def term(i):
        lam = spec.lambda_nodes[i]
        w = spec.lambda_weights[i]
        mix = (w * spec.c_even[i], w * spec.c_odd[i])
        alpha = -(lam / hbar) * integral
        return np.exp(1j * alpha) * _eigen_values(lam, mix, model, ermakov, grid, t, tables[i])

    idx = range(spec.lambda_nodes.size)
    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            terms = list(pool.map(term, idx))
    else:
        terms = map(term, idx)
    total = np.zeros(grid.n_points, dtype=complex)
    for v in terms:
        total += v
    return WavefunctionFrame(grid, float(t), total, label="packet")
