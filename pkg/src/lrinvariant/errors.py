"""Exception hierarchy shared by every module."""


class LRError(Exception):
    """Base class for all errors raised by this package."""


class OutOfWindow(LRError, ValueError):
    """A time argument falls outside the validity window of a model or solution."""


class NonpositiveMass(LRError, ValueError):
    pass


class NonpositiveOmega1Sq(LRError, ValueError):
    """The closed-form exponential-mass solution needs a positive shifted frequency."""


class StepLimitExceeded(LRError, RuntimeError):
    pass


class NonFiniteRhs(LRError, FloatingPointError):
    def __init__(self, t, state):
        self.t = t
        self.state = state
        super().__init__(f"non-finite right-hand side at t={t!r}, state={state!r}")


class BlowUp(LRError, FloatingPointError):
    def __init__(self, t, norm, bound):
        self.t = t
        self.norm = norm
        super().__init__(f"state norm {norm:.3e} exceeded bound {bound:.3e} at t={t!r}")


class RhoCollapse(LRError, RuntimeError):
    def __init__(self, t, rho, floor):
        self.t = t
        self.rho = rho
        super().__init__(f"rho fell to {rho:.3e} (floor {floor:.1e}) at t={t!r}")


class ResolutionTooCoarse(LRError, ValueError):
    pass


class OutOfRange(LRError, ValueError):
    pass


class BoundaryLeak(LRError, RuntimeError):
    def __init__(self, magnitude, t=None):
        self.magnitude = magnitude
        self.t = t
        where = "" if t is None else f" at t={t!r}"
        super().__init__(f"wavefunction does not vanish at the grid boundary{where} "
                         f"(relative boundary magnitude {magnitude:.3e})")


class SolveFailure(LRError, RuntimeError):
    pass


class QuadratureFailure(LRError, RuntimeError):
    pass


class ConfigError(LRError, ValueError):
    pass
