"""Mesh, function descriptors, problem specification and solution container.

Everything here is immutable after construction. Function descriptors carry a
family tag plus parameters so that a problem can be echoed back into run
metadata and rebuilt from a flat configuration file.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

__all__ = [
    "ValidationError",
    "Grid1D",
    "TimeFunction",
    "SpaceFunction",
    "RelaxationKernel",
    "ProblemSpec",
    "SolutionField",
    "build_grid",
    "grid_for_ratio",
    "sample_space_function",
    "sample_time_function",
]

log = logging.getLogger(__name__)

KINDS = ("classical", "damped", "viscoelastic")


class ValidationError(ValueError):
    """Raised when a grid, problem or configuration violates its contract."""


# --------------------------------------------------------------------------
# Grid
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class Grid1D:
    """Uniform space-time mesh on ``[0, L] x [0, T]``.

    ``nx`` and ``nt`` are point counts, both endpoints included, so that
    ``x_i = i*dx`` for ``i = 0..nx-1`` and ``t_n = n*dt`` for ``n = 0..nt-1``.
    """

    L: float
    T: float
    nx: int
    nt: int

    def __post_init__(self) -> None:
        if not (self.L > 0 and self.T > 0):
            raise ValidationError(f"extents must be positive, got L={self.L}, T={self.T}")
        if self.nx < 4:
            raise ValidationError(f"nx must be >= 4 (boundary stencil needs 3 nodes), got {self.nx}")
        if self.nt < 3:
            raise ValidationError(f"nt must be >= 3 (three-level schemes), got {self.nt}")

    @property
    def dx(self) -> float:
        return self.L / (self.nx - 1)

    @property
    def dt(self) -> float:
        return self.T / (self.nt - 1)

    @property
    def r(self) -> float:
        """CFL ratio dt/dx."""
        return self.dt / self.dx

    @property
    def x(self) -> np.ndarray:
        return np.arange(self.nx) * self.dx

    @property
    def t(self) -> np.ndarray:
        return np.arange(self.nt) * self.dt

    def refined(self, factor: int = 2) -> "Grid1D":
        """Grid with both spacings divided by ``factor`` (r unchanged)."""
        return Grid1D(self.L, self.T, (self.nx - 1) * factor + 1, (self.nt - 1) * factor + 1)


def build_grid(L: float, T: float, nx: int, nt: int) -> Grid1D:
    return Grid1D(float(L), float(T), int(nx), int(nt))


def grid_for_ratio(L: float, T: float, nx: int, r: float) -> Grid1D:
    """Grid with ``nx`` points whose time step gives CFL ratio as close to ``r`` as possible
    without exceeding it."""
    dx = L / (nx - 1)
    nt = int(math.ceil(T / (r * dx) - 1e-9)) + 1
    return Grid1D(float(L), float(T), int(nx), max(nt, 3))


# --------------------------------------------------------------------------
# Function descriptors
# --------------------------------------------------------------------------


def _tabulated(nodes, values) -> Callable[[np.ndarray], np.ndarray]:
    nodes = np.asarray(nodes, dtype=float)
    values = np.asarray(values, dtype=float)
    if nodes.ndim != 1 or nodes.shape != values.shape or nodes.size < 2:
        raise ValidationError("tabulated function needs matching 1D node/value arrays of length >= 2")
    if np.any(np.diff(nodes) <= 0):
        raise ValidationError("tabulated nodes must be strictly increasing")
    return lambda s: np.interp(s, nodes, values)


@dataclass(frozen=True)
class _Function:
    family: str
    params: tuple = ()
    fn: Callable = field(default=None, repr=False, compare=False)
    dfn: Optional[Callable] = field(default=None, repr=False, compare=False)

    def __call__(self, s):
        s_arr = np.asarray(s, dtype=float)
        out = np.asarray(self.fn(s_arr), dtype=float)
        if out.shape != s_arr.shape:
            out = np.broadcast_to(out, s_arr.shape).copy()
        return out if out.ndim else float(out)

    @property
    def has_derivative(self) -> bool:
        return self.dfn is not None

    def derivative(self, s):
        if self.dfn is None:
            raise ValueError(f"{self.family} has no analytic derivative")
        s_arr = np.asarray(s, dtype=float)
        out = np.asarray(self.dfn(s_arr), dtype=float)
        if out.shape != s_arr.shape:
            out = np.broadcast_to(out, s_arr.shape).copy()
        return out if out.ndim else float(out)

    def describe(self) -> str:
        if not self.params:
            return self.family
        return f"{self.family}({', '.join(f'{p:g}' if isinstance(p, float) else str(p) for p in self.params)})"


class TimeFunction(_Function):
    """Boundary input of time: Dirichlet datum f(t) or Neumann datum h(t)."""

    @classmethod
    def zero(cls) -> "TimeFunction":
        return cls("zero", (), lambda t: np.zeros_like(t), lambda t: np.zeros_like(t))

    @classmethod
    def constant(cls, c: float) -> "TimeFunction":
        c = float(c)
        return cls("constant", (c,), lambda t: np.full_like(t, c), lambda t: np.zeros_like(t))

    @classmethod
    def exp_decay(cls, gamma: float = 1.0) -> "TimeFunction":
        """exp(-gamma t)."""
        g = float(gamma)
        return cls("exp_decay", (g,), lambda t: np.exp(-g * t), lambda t: -g * np.exp(-g * t))

    @classmethod
    def sine(cls, omega: float = 0.2) -> "TimeFunction":
        """sin(omega t); the default is sin(t/5)."""
        w = float(omega)
        return cls("sine", (w,), lambda t: np.sin(w * t), lambda t: w * np.cos(w * t))

    @classmethod
    def saturating(cls, c: float = 5.0) -> "TimeFunction":
        """c t / (t + 1), approaching c for large t."""
        c = float(c)
        return cls("saturating", (c,), lambda t: c * t / (t + 1.0), lambda t: c / (t + 1.0) ** 2)

    @classmethod
    def sqrt(cls) -> "TimeFunction":
        # derivative is singular at t = 0, so none is advertised
        return cls("sqrt", (), lambda t: np.sqrt(t), None)

    @classmethod
    def tabulated(cls, times, values) -> "TimeFunction":
        return cls("tabulated", (len(times),), _tabulated(times, values), None)

    @classmethod
    def custom(cls, fn: Callable, dfn: Optional[Callable] = None, name: str = "custom") -> "TimeFunction":
        return cls(name, (), fn, dfn)


class SpaceFunction(_Function):
    """Function of x on [0, L]: initial data or damping coefficient."""

    @classmethod
    def zero(cls) -> "SpaceFunction":
        return cls("zero", (), lambda x: np.zeros_like(x), lambda x: np.zeros_like(x))

    @classmethod
    def constant(cls, c: float) -> "SpaceFunction":
        c = float(c)
        return cls("constant", (c,), lambda x: np.full_like(x, c), lambda x: np.zeros_like(x))

    @classmethod
    def cosine(cls, k: float = 0.2) -> "SpaceFunction":
        """cos(k x); the default is cos(x/5)."""
        k = float(k)
        return cls("cosine", (k,), lambda x: np.cos(k * x), lambda x: -k * np.sin(k * x))

    @classmethod
    def sine(cls, k: float = 0.2) -> "SpaceFunction":
        """sin(k x); the default is sin(x/5)."""
        k = float(k)
        return cls("sine", (k,), lambda x: np.sin(k * x), lambda x: k * np.cos(k * x))

    @classmethod
    def exp_decay(cls, gamma: float = 1.0) -> "SpaceFunction":
        g = float(gamma)
        return cls("exp_decay", (g,), lambda x: np.exp(-g * x), lambda x: -g * np.exp(-g * x))

    @classmethod
    def sin_squared(cls) -> "SpaceFunction":
        return cls("sin_squared", (), lambda x: np.sin(x) ** 2, lambda x: np.sin(2.0 * x))

    @classmethod
    def shifted_square(cls) -> "SpaceFunction":
        """(x + 1)^2."""
        return cls("shifted_square", (), lambda x: (x + 1.0) ** 2, lambda x: 2.0 * (x + 1.0))

    @classmethod
    def abs(cls) -> "SpaceFunction":
        return cls("abs", (), lambda x: np.abs(x), lambda x: np.sign(x))

    @classmethod
    def step(cls, x0: float, left: float = 1.0, right: float = 0.0) -> "SpaceFunction":
        """``left`` for x <= x0, ``right`` otherwise."""
        x0, lo, hi = float(x0), float(left), float(right)
        return cls("step", (x0, lo, hi), lambda x: np.where(x <= x0, lo, hi), None)

    @classmethod
    def mixed_mode(cls, k: int, L: float, amplitude: float = 1.0) -> "SpaceFunction":
        """amplitude * sin((k - 1/2) pi x / L): zero at 0, zero slope at L."""
        kk = (k - 0.5) * math.pi / L
        A = float(amplitude)
        return cls("mixed_mode", (int(k), float(L), A),
                   lambda x: A * np.sin(kk * x), lambda x: A * kk * np.cos(kk * x))

    @classmethod
    def tabulated(cls, xs, values) -> "SpaceFunction":
        return cls("tabulated", (len(xs),), _tabulated(xs, values), None)

    @classmethod
    def custom(cls, fn: Callable, dfn: Optional[Callable] = None, name: str = "custom") -> "SpaceFunction":
        return cls(name, (), fn, dfn)


def _log_kernel(t):
    return 0.2 / (np.log(t + 2.0) ** 2 * (t + 1.0))


def _log_kernel_prime(t):
    return -_log_kernel(t) * (2.0 / ((t + 2.0) * np.log(t + 2.0)) + 1.0 / (t + 1.0))


class RelaxationKernel(_Function):
    """Memory kernel g(t) of the viscoelastic equation.

    ``tail`` (when set) returns the analytic value of the integral of g over
    ``[H, inf)``; it is ``inf`` for non-integrable families.
    """

    tail: Optional[Callable[[float], float]] = None

    def __init__(self, family, params=(), fn=None, dfn=None, tail=None):
        super().__init__(family, params, fn, dfn)
        object.__setattr__(self, "tail", tail)

    @property
    def is_zero(self) -> bool:
        return self.family == "zero"

    @classmethod
    def zero(cls) -> "RelaxationKernel":
        return cls("zero", (), lambda t: np.zeros_like(t), lambda t: np.zeros_like(t), lambda H: 0.0)

    @classmethod
    def constant(cls, c: float = 1.0) -> "RelaxationKernel":
        """Constant test kernel; not integrable on the half line."""
        c = float(c)
        return cls("constant", (c,), lambda t: np.full_like(t, c), lambda t: np.zeros_like(t),
                   lambda H: 0.0 if c == 0 else math.inf)

    @classmethod
    def exp_shift(cls, rate: float = 1.0) -> "RelaxationKernel":
        """exp(-rate (t + 1)); the default is exp(-(t+1))."""
        k = float(rate)
        return cls("exp_shift", (k,), lambda t: np.exp(-k * (t + 1.0)),
                   lambda t: -k * np.exp(-k * (t + 1.0)),
                   lambda H: math.exp(-k * (H + 1.0)) / k)

    @classmethod
    def power(cls, p: float = 10.0) -> "RelaxationKernel":
        """(t + 1)^(-p)."""
        p = float(p)

        def tail(H):
            return (H + 1.0) ** (1.0 - p) / (p - 1.0) if p > 1.0 else math.inf

        return cls("power", (p,), lambda t: (t + 1.0) ** (-p), lambda t: -p * (t + 1.0) ** (-p - 1.0), tail)

    @classmethod
    def log_type(cls) -> "RelaxationKernel":
        """0.2 / (ln^2(t + 2) (t + 1))."""
        # tail of 0.2/((t+2) ln^2(t+2)); the true integrand exceeds it by (t+2)/(t+1) -> 1
        return cls("log_type", (), _log_kernel, _log_kernel_prime, lambda H: 0.2 / math.log(H + 2.0))

    @classmethod
    def tabulated(cls, times, values) -> "RelaxationKernel":
        return cls("tabulated", (len(times),), _tabulated(times, values), None, None)

    @classmethod
    def custom(cls, fn: Callable, dfn: Optional[Callable] = None, name: str = "custom",
               tail: Optional[Callable[[float], float]] = None) -> "RelaxationKernel":
        return cls(name, (), fn, dfn, tail)


# --------------------------------------------------------------------------
# Problem and solution
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class ProblemSpec:
    """One initial-boundary value problem on ``grid``.

    ``u(0, t) = f(t)`` and ``u_x(L, t) = h(t)``; ``u(x, 0) = phi``,
    ``u_t(x, 0) = psi``. ``kind`` selects the equation: the classical wave
    equation, the damped one (needs ``a``) or the viscoelastic one (needs
    ``g``).
    """

    kind: str
    grid: Grid1D
    phi: SpaceFunction
    psi: SpaceFunction
    f: TimeFunction = field(default_factory=TimeFunction.zero)
    h: TimeFunction = field(default_factory=TimeFunction.zero)
    a: Optional[SpaceFunction] = None
    g: Optional[RelaxationKernel] = None
    init_order: str = "first"
    allow_cfl_violation: bool = False
    history_cap: Optional[int] = None

    def __post_init__(self) -> None:
        if self.kind not in KINDS:
            raise ValidationError(f"kind must be one of {KINDS}, got {self.kind!r}")
        if self.kind == "damped" and self.a is None:
            raise ValidationError("kind=damped requires a damping coefficient a")
        if self.kind == "viscoelastic" and self.g is None:
            raise ValidationError("kind=viscoelastic requires a relaxation kernel g")
        if self.kind == "classical" and (self.a is not None or self.g is not None):
            raise ValidationError("kind=classical takes neither a nor g")
        if self.init_order not in ("first", "second"):
            raise ValidationError(f"init_order must be 'first' or 'second', got {self.init_order!r}")
        if self.history_cap is not None and self.history_cap < 1:
            raise ValidationError("history_cap must be a positive integer")

    def compatibility_warnings(self) -> list[str]:
        """Corner mismatches between the data; reported, never enforced."""
        out = []
        L = self.grid.L
        h0 = float(self.h(0.0))
        if self.phi.has_derivative:
            slope = float(self.phi.derivative(L))
            if abs(slope - h0) > 1e-8:
                out.append(f"phi'(L) = {slope:.6g} differs from h(0) = {h0:.6g}")
        f0 = float(self.f(0.0))
        phi0 = float(self.phi(0.0))
        if abs(phi0 - f0) > 1e-8:
            out.append(f"phi(0) = {phi0:.6g} differs from f(0) = {f0:.6g}")
        return out


@dataclass(frozen=True)
class SolutionField:
    """Nodal values ``values[i, n] = U_i^n`` on ``grid``.

    A run that produced a non-finite value stops there: ``diverged_at`` is the
    first bad time level and columns from it on are NaN.
    """

    values: np.ndarray
    grid: Grid1D
    diverged_at: Optional[int] = None
    warnings: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        if self.values.shape != (self.grid.nx, self.grid.nt):
            raise ValidationError(
                f"values shape {self.values.shape} does not match grid ({self.grid.nx}, {self.grid.nt})")
        self.values.setflags(write=False)

    @property
    def diverged(self) -> bool:
        return self.diverged_at is not None

    @property
    def valid_levels(self) -> int:
        """Number of leading time levels that hold finite data."""
        return self.grid.nt if self.diverged_at is None else self.diverged_at

    def max_norm(self) -> np.ndarray:
        """Max over space at every time level."""
        return np.max(np.abs(self.values), axis=0)


def sample_space_function(fn: SpaceFunction, grid: Grid1D) -> np.ndarray:
    return np.asarray(fn(grid.x), dtype=float)


def sample_time_function(fn: TimeFunction, grid: Grid1D) -> np.ndarray:
    return np.asarray(fn(grid.t), dtype=float)


def warn_compatibility(spec: ProblemSpec) -> list[str]:
    msgs = spec.compatibility_warnings()
    for m in msgs:
        log.info("data incompatibility: %s", m)
    return msgs
