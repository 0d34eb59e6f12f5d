"""Time-dependent model functions M(t), omega(t), y(t) and derived rates.

A model is the triple of time functions entering the Hamiltonian

    H = p^2 / (2 M) - M omega^2 q^2 / 2 + y (p q + q p) / 2

together with hbar.  ``y`` may be ``None``, which short-circuits every y term
downstream (the "y-suppressed" path); a zero descriptor runs the general path
with vanishing coefficients.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.interpolate import CubicSpline

from .errors import NonpositiveMass, OutOfWindow

KINDS = ("constant", "exponential", "polynomial", "tabulated")


@dataclass(frozen=True, eq=False)
class TimeFunction:
    """Descriptor of a scalar function of time with its first derivative.

    ``kind`` selects the form:

    * ``constant``: ``coefficients = (c,)``
    * ``exponential``: ``coefficients = (a, b)`` for ``a * exp(b t)``
    * ``polynomial``: ascending coefficients ``(c0, c1, ...)``
    * ``tabulated``: ``times`` and ``values`` samples, not-a-knot cubic spline

    Evaluation outside ``window`` raises :class:`OutOfWindow`.
    """

    kind: str
    coefficients: tuple = ()
    window: tuple = (-math.inf, math.inf)
    times: Optional[tuple] = None
    values: Optional[tuple] = None
    _spline: object = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown time-function kind {self.kind!r}")
        lo, hi = (float(w) for w in self.window)
        if not lo < hi:
            raise ValueError(f"empty window {self.window!r}")
        object.__setattr__(self, "coefficients", tuple(float(c) for c in self.coefficients))
        if self.kind == "tabulated":
            ts = np.asarray(self.times, dtype=float)
            vs = np.asarray(self.values, dtype=float)
            if ts.ndim != 1 or ts.size < 4 or ts.shape != vs.shape:
                raise ValueError("tabulated function needs >= 4 matching samples")
            if np.any(np.diff(ts) <= 0):
                raise ValueError("tabulated sample times must be strictly increasing")
            # the window of a table is its sample range, intersected with any given window
            lo, hi = max(lo, ts[0]), min(hi, ts[-1])
            object.__setattr__(self, "times", tuple(ts))
            object.__setattr__(self, "values", tuple(vs))
            object.__setattr__(self, "_spline", CubicSpline(ts, vs, bc_type="not-a-knot"))
        else:
            need = {"constant": 1, "exponential": 2}.get(self.kind)
            if need is not None and len(self.coefficients) != need:
                raise ValueError(f"{self.kind} needs {need} coefficients")
            if self.kind == "polynomial" and not self.coefficients:
                raise ValueError("polynomial needs at least one coefficient")
        object.__setattr__(self, "window", (lo, hi))

    @classmethod
    def constant(cls, c, window=(-math.inf, math.inf)):
        return cls("constant", (c,), window)

    @classmethod
    def exponential(cls, a, b, window=(-math.inf, math.inf)):
        return cls("exponential", (a, b), window)

    @classmethod
    def polynomial(cls, coefficients: Sequence[float], window=(-math.inf, math.inf)):
        return cls("polynomial", tuple(coefficients), window)

    @classmethod
    def tabulated(cls, times, values, window=(-math.inf, math.inf)):
        return cls("tabulated", (), window, tuple(times), tuple(values))

    def _check(self, t):
        lo, hi = self.window
        if isinstance(t, (float, int)):
            if not lo <= t <= hi:
                raise OutOfWindow(f"t={t!r} outside window [{lo}, {hi}]")
            return None
        ta = np.asarray(t, dtype=float)
        if np.any(ta < lo) or np.any(ta > hi) or np.any(np.isnan(ta)):
            raise OutOfWindow(f"t={t!r} outside window [{lo}, {hi}]")
        return ta

    def _scalar_value(self, t):
        c = self.coefficients
        if self.kind == "constant":
            return c[0]
        if self.kind == "exponential":
            return c[0] * math.exp(c[1] * t)
        if self.kind == "polynomial":
            out = 0.0
            for a in reversed(c):
                out = out * t + a
            return out
        return float(self._spline(t))

    def _scalar_derivative(self, t):
        c = self.coefficients
        if self.kind == "constant":
            return 0.0
        if self.kind == "exponential":
            return c[0] * c[1] * math.exp(c[1] * t)
        if self.kind == "polynomial":
            out = 0.0
            for k in range(len(c) - 1, 0, -1):
                out = out * t + k * c[k]
            return out
        return float(self._spline(t, 1))

    def value(self, t):
        ta = self._check(t)
        if ta is None:
            return self._scalar_value(t)
        c = self.coefficients
        if self.kind == "constant":
            out = np.full_like(ta, c[0])
        elif self.kind == "exponential":
            out = c[0] * np.exp(c[1] * ta)
        elif self.kind == "polynomial":
            out = np.polynomial.polynomial.polyval(ta, c)
        else:
            out = self._spline(ta)
        return out if out.ndim else float(out)

    def derivative(self, t):
        ta = self._check(t)
        if ta is None:
            return self._scalar_derivative(t)
        c = self.coefficients
        if self.kind == "constant":
            out = np.zeros_like(ta)
        elif self.kind == "exponential":
            out = c[0] * c[1] * np.exp(c[1] * ta)
        elif self.kind == "polynomial":
            dc = np.polynomial.polynomial.polyder(c) if len(c) > 1 else (0.0,)
            out = np.polynomial.polynomial.polyval(ta, dc)
        else:
            out = self._spline(ta, 1)
        return out if out.ndim else float(out)

    def to_dict(self) -> dict:
        d = {"kind": self.kind}
        if self.kind == "tabulated":
            d["times"] = list(self.times)
            d["values"] = list(self.values)
        else:
            d["coefficients"] = list(self.coefficients)
        return d


ZERO = TimeFunction.constant(0.0)


@dataclass(frozen=True)
class OscillatorModel:
    """The triple (M, omega, y) plus hbar.

    ``y_fn=None`` selects the y-suppressed evaluation path.
    """

    mass_fn: TimeFunction
    frequency_fn: TimeFunction
    y_fn: Optional[TimeFunction] = None
    hbar: float = 1.0
    name: str = "model"

    def __post_init__(self):
        if not self.hbar > 0:
            raise ValueError("hbar must be positive")

    @property
    def window(self) -> tuple:
        fns = [self.mass_fn, self.frequency_fn] + ([self.y_fn] if self.y_fn is not None else [])
        return (max(f.window[0] for f in fns), min(f.window[1] for f in fns))

    def check_time(self, t):
        lo, hi = self.window
        if isinstance(t, (float, int)):
            if not lo <= t <= hi:
                raise OutOfWindow(f"t={t!r} outside model window [{lo}, {hi}]")
            return
        ta = np.asarray(t, dtype=float)
        if np.any(ta < lo) or np.any(ta > hi) or np.any(np.isnan(ta)):
            raise OutOfWindow(f"t={t!r} outside model window [{lo}, {hi}]")

    def mass(self, t):
        self.check_time(t)
        m = self.mass_fn.value(t)
        if (m <= 0) if isinstance(m, float) else np.any(np.asarray(m) <= 0):
            raise NonpositiveMass(f"M(t) <= 0 at t={t!r}")
        return m

    def omega_sq(self, t):
        self.check_time(t)
        w = self.frequency_fn.value(t)
        return w * w

    def y(self, t):
        """y(t); exactly zero on the suppressed path."""
        self.check_time(t)
        if self.y_fn is None:
            return 0.0 if np.ndim(t) == 0 else np.zeros(np.shape(t))
        return self.y_fn.value(t)

    def without_y(self) -> "OscillatorModel":
        return OscillatorModel(self.mass_fn, self.frequency_fn, None, self.hbar, self.name)

    def to_dict(self) -> dict:
        lo, hi = self.window
        return {
            "hbar": self.hbar,
            "mass": self.mass_fn.to_dict(),
            "frequency": self.frequency_fn.to_dict(),
            "y": None if self.y_fn is None else self.y_fn.to_dict(),
            "window": [lo, hi],
        }


def eval_gamma(model: OscillatorModel, t):
    """Logarithmic mass rate dM/dt / M from the descriptor's own derivative."""
    m = model.mass(t)
    return model.mass_fn.derivative(t) / m


def eval_modified_frequency_sq(model: OscillatorModel, t):
    """Omega^2 = omega^2 + y^2 + gamma y + dy/dt.  May be negative."""
    w2 = model.omega_sq(t)
    if model.y_fn is None:
        return w2
    g = eval_gamma(model, t)
    y = model.y_fn.value(t)
    return w2 + y * y + g * y + model.y_fn.derivative(t)


@dataclass(frozen=True)
class CaldirolaKanaiParams:
    """Constant-frequency model with mass m exp(gamma t) and constant y."""

    m: float = 1.0
    gamma: float = 0.0
    omega0: float = 1.0
    y0: float = 0.0

    @property
    def omega0_sq(self) -> float:
        """Modified frequency squared, constant for this family."""
        return self.omega0 ** 2 + self.y0 ** 2 + self.gamma * self.y0

    @property
    def omega1_sq(self) -> float:
        return self.omega0_sq + self.gamma ** 2 / 4.0

    @property
    def omega1(self) -> float:
        return math.sqrt(self.omega1_sq)


def make_caldirola_kanai(ck: CaldirolaKanaiParams, hbar: float = 1.0,
                         window=(-math.inf, math.inf), suppress_y: bool = False) -> OscillatorModel:
    if not ck.m > 0:
        raise NonpositiveMass(f"m must be positive, got {ck.m}")
    y_fn = None if suppress_y else TimeFunction.constant(ck.y0, window)
    return OscillatorModel(
        mass_fn=TimeFunction.exponential(ck.m, ck.gamma, window),
        frequency_fn=TimeFunction.constant(ck.omega0, window),
        y_fn=y_fn,
        hbar=hbar,
        name=f"ck(m={ck.m:g},gamma={ck.gamma:g},omega0={ck.omega0:g},y0={ck.y0:g})",
    )


@dataclass(frozen=True)
class Preset:
    ck: CaldirolaKanaiParams
    hbar: float
    q_min: float
    q_max: float
    n_points: int
    dt: float


PRESETS = {
    "ck-reference": Preset(CaldirolaKanaiParams(m=1.0, gamma=2.0, omega0=1.0, y0=1.0),
                           hbar=1.0, q_min=-30.0, q_max=30.0, n_points=4096, dt=1e-4),
}
