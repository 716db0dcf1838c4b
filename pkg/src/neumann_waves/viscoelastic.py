"""Crank-Nicolson scheme for ``u_tt = u_xx - int_0^t g(t-s) u_xx(s) ds``.

The time discretisation is the three-level average
``(U^{n+1} - 2U^n + U^{n-1})/dt^2 = (F^{n+1} + 2F^n + F^{n-1})/4`` with the
memory integral in each ``F^k`` replaced by the trapezoid rule on the time
grid. Collecting terms gives one tridiagonal solve per step,

    K U^{n+1} = 2 K' U^n + K'' U^{n-1} - delta w_0 K''' U^0
                - 2 delta sum_{m=1}^{n-2} w_m K''' U^m + D^n + N^n,

where ``w_m = g(t_{n-1}-t_m) + 2 g(t_n-t_m) + g(t_{n+1}-t_m)``. The last row of
every matrix has the Neumann node folded in through the backward stencil.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .core import (
    Grid1D,
    ProblemSpec,
    RelaxationKernel,
    SolutionField,
    TimeFunction,
    ValidationError,
    sample_space_function,
    sample_time_function,
    warn_compatibility,
)
from .damped import damped_init, neumann_ghost

__all__ = [
    "SingularSystemError",
    "ViscoCoefficients",
    "Tridiagonal",
    "HistoryBuffer",
    "visco_coefficients",
    "assemble_visco_matrices",
    "kernel_table",
    "memory_weights",
    "memory_quadrature",
    "thomas_solve",
    "ThomasFactor",
    "visco_step",
    "visco_solve",
]

log = logging.getLogger(__name__)


class SingularSystemError(np.linalg.LinAlgError):
    """Zero pivot met during tridiagonal elimination."""


@dataclass(frozen=True)
class ViscoCoefficients:
    r: float
    delta: float
    a: float
    b: float
    c: float


def visco_coefficients(g: RelaxationKernel, grid: Grid1D) -> ViscoCoefficients:
    dt = grid.dt
    delta = 0.5 * dt
    g0, g1, g2 = (float(v) for v in g(np.array([0.0, dt, 2.0 * dt])))
    return ViscoCoefficients(r=grid.r, delta=delta, a=delta * g0, b=delta * (g0 + g1),
                             c=delta * (g0 + 4.0 * g1 + 2.0 * g2))


@dataclass(frozen=True)
class Tridiagonal:
    """Square tridiagonal matrix stored by its three diagonals."""

    sub: np.ndarray
    diag: np.ndarray
    sup: np.ndarray

    def __post_init__(self) -> None:
        m = len(self.diag)
        if len(self.sub) != m - 1 or len(self.sup) != m - 1:
            raise ValueError("sub/sup must be one shorter than diag")

    @property
    def size(self) -> int:
        return len(self.diag)

    def matvec(self, x: np.ndarray) -> np.ndarray:
        y = self.diag * x
        y[:-1] += self.sup * x[1:]
        y[1:] += self.sub * x[:-1]
        return y

    def to_dense(self) -> np.ndarray:
        return np.diag(self.diag) + np.diag(self.sup, 1) + np.diag(self.sub, -1)

    def is_diagonally_dominant(self) -> bool:
        off = np.zeros_like(self.diag)
        off[:-1] += np.abs(self.sup)
        off[1:] += np.abs(self.sub)
        return bool(np.all(np.abs(self.diag) > off))


def _banded(m: int, diag: float, off: float, last_sub: float, last_diag: float) -> Tridiagonal:
    d = np.full(m, diag)
    sub = np.full(m - 1, off)
    sup = np.full(m - 1, off)
    d[-1] = last_diag
    sub[-1] = last_sub
    return Tridiagonal(sub=sub, diag=d, sup=sup)


def assemble_visco_matrices(coeffs: ViscoCoefficients, nx: int):
    """The four interior-node matrices ``(K, K', K'', K''')`` of size ``nx - 2``.

    The last row of ``K''`` carries ``-(4/r^2 + 2/3 (1 - c))`` on the diagonal:
    folding the Neumann node into the ``U^{n-1}`` row keeps the sign of the
    interior ``-2(1 + 2/r^2 - c)``.
    """
    if nx < 4:
        raise ValidationError("nx must be >= 4")
    m = nx - 2
    ir2 = 1.0 / coeffs.r**2
    a, b, c = coeffs.a, coeffs.b, coeffs.c
    K = _banded(m, 2.0 * (1.0 + 2.0 * ir2 - a), -(1.0 - a),
                -(2.0 / 3.0) * (1.0 - a), 4.0 * ir2 + (2.0 / 3.0) * (1.0 - a))
    K1 = _banded(m, -2.0 * (1.0 - 2.0 * ir2 - b), 1.0 - b,
                 (2.0 / 3.0) * (1.0 - b), 4.0 * ir2 - (2.0 / 3.0) * (1.0 - b))
    K2 = _banded(m, -2.0 * (1.0 + 2.0 * ir2 - c), 1.0 - c,
                 (2.0 / 3.0) * (1.0 - c), -(4.0 * ir2 + (2.0 / 3.0) * (1.0 - c)))
    K3 = _banded(m, -2.0, 1.0, 2.0 / 3.0, -2.0 / 3.0)
    return K, K1, K2, K3


def kernel_table(g: RelaxationKernel, grid: Grid1D) -> np.ndarray:
    """``g(t_k)`` for ``k = 0..nt`` (one lag beyond the grid for ``g(t_{n+1})``)."""
    return np.asarray(g(np.arange(grid.nt + 1) * grid.dt), dtype=float)


def memory_weights(n: int, g: RelaxationKernel | np.ndarray, grid: Grid1D | None = None) -> tuple[float, np.ndarray]:
    """Weight of ``U^0`` and weights ``w_m`` for ``m = 1..n-2`` at step ``n``.

    ``g`` may be a kernel (``grid`` then required) or a precomputed :func:`kernel_table`.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if isinstance(g, np.ndarray):
        G = g
    elif grid is None:
        raise ValueError("grid is required when g is a kernel")
    else:
        G = np.asarray(g(np.arange(n + 2) * grid.dt), dtype=float)
    w0 = G[n - 1] + 2.0 * G[n] + G[n + 1]
    if n < 3:
        return float(w0), np.empty(0)
    lag = n - np.arange(1, n - 1)  # t_n - t_m in steps
    return float(w0), G[lag - 1] + 2.0 * G[lag] + G[lag + 1]


def memory_quadrature(n: int, samples: np.ndarray, coeffs: ViscoCoefficients, G: np.ndarray) -> float:
    """Memory term the step ``n -> n+1`` applies to a scalar history ``samples[0..n+1]``.

    Returns ``(a v_{n+1} + 2b v_n + c v_{n-1} + delta w_0 v_0 + 2 delta sum w_m v_m)/4``,
    the same weights the recurrence uses. For ``n >= 2`` this is the 1-2-1
    average over ``t_{n-1}, t_n, t_{n+1}`` of the trapezoid rule for
    ``int_0^t g(t - s) v(s) ds``.
    """
    v = np.asarray(samples, dtype=float)
    if v.size < n + 2:
        raise ValueError(f"need samples at levels 0..{n + 1}")
    w0, w = memory_weights(n, G)
    total = coeffs.a * v[n + 1] + 2.0 * coeffs.b * v[n] + coeffs.c * v[n - 1] + coeffs.delta * w0 * v[0]
    if w.size:
        total += 2.0 * coeffs.delta * float(w @ v[1:n - 1])
    return 0.25 * total


class ThomasFactor:
    """Forward-elimination data of a tridiagonal matrix, reusable across right-hand sides."""

    def __init__(self, A: Tridiagonal):
        m = A.size
        sub = A.sub.tolist()
        diag = A.diag.tolist()
        sup = A.sup.tolist()
        cp = [0.0] * max(m - 1, 0)
        inv = [0.0] * m
        d = diag[0]
        if d == 0.0:
            raise SingularSystemError("zero pivot in row 0")
        inv[0] = 1.0 / d
        for i in range(1, m):
            cp[i - 1] = sup[i - 1] * inv[i - 1]
            d = diag[i] - sub[i - 1] * cp[i - 1]
            if d == 0.0:
                raise SingularSystemError(f"zero pivot in row {i}")
            inv[i] = 1.0 / d
        self._sub = sub
        self._cp = cp
        self._inv = inv
        self.size = m

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        sub, cp, inv = self._sub, self._cp, self._inv
        m = self.size
        y = rhs.tolist()
        if len(y) != m:
            raise ValueError(f"rhs has length {len(y)}, expected {m}")
        y[0] *= inv[0]
        for i in range(1, m):
            y[i] = (y[i] - sub[i - 1] * y[i - 1]) * inv[i]
        for i in range(m - 2, -1, -1):
            y[i] -= cp[i] * y[i + 1]
        return np.array(y)


def thomas_solve(A: Tridiagonal, rhs: np.ndarray) -> np.ndarray:
    """Solve ``A x = rhs`` by the Thomas algorithm (no pivoting)."""
    return ThomasFactor(A).solve(np.asarray(rhs, dtype=float))


@dataclass
class HistoryBuffer:
    """Stored interior columns and their ``K''' U^m`` images, plus Neumann samples.

    Rows are time levels. Only rows ``0..n`` are meaningful after level ``n``
    is written; written rows are never modified.
    """

    columns: np.ndarray
    curvature: np.ndarray
    h: np.ndarray
    f: np.ndarray
    length: int = 0

    @classmethod
    def empty(cls, nt: int, m: int) -> "HistoryBuffer":
        return cls(columns=np.zeros((nt, m)), curvature=np.zeros((nt, m)), h=np.zeros(nt), f=np.zeros(nt))

    def append(self, col: np.ndarray, K3: Tridiagonal, h_val: float, f_val: float) -> None:
        n = self.length
        self.columns[n] = col
        self.curvature[n] = K3.matvec(col)
        self.h[n] = h_val
        self.f[n] = f_val
        self.length = n + 1


def visco_rhs(history: HistoryBuffer, n: int, coeffs: ViscoCoefficients, matrices, G: np.ndarray,
              f_n: float, h_next: float, grid: Grid1D, history_cap: Optional[int] = None) -> np.ndarray:
    """Right-hand side of the step from level ``n`` to ``n + 1``."""
    _, K1, K2, _ = matrices
    delta, a, b, c = coeffs.delta, coeffs.a, coeffs.b, coeffs.c
    dx = grid.dx
    w0, w = memory_weights(n, G, grid)
    if history_cap is not None and w.size > history_cap:
        # drop the oldest levels m < n - history_cap
        w = w.copy()
        w[: w.size - history_cap] = 0.0
    U = history.columns
    rhs = 2.0 * K1.matvec(U[n]) + K2.matvec(U[n - 1]) - delta * w0 * history.curvature[0]
    hist_h = 0.0
    wsum = float(w.sum())
    if w.size:
        rhs -= 2.0 * delta * (w @ history.curvature[1:n - 1])
        hist_h = float(w @ history.h[1:n - 1])
    rhs[0] += ((4.0 - a - 2.0 * b - c) - delta * w0 - 2.0 * delta * wsum) * f_n
    hs = history.h
    rhs[-1] += ((2.0 * dx / 3.0) * ((1.0 - a) * h_next + 2.0 * (1.0 - b) * hs[n] + (1.0 - c) * hs[n - 1])
                - (2.0 * delta * dx / 3.0) * w0 * hs[0]
                - (4.0 * delta * dx / 3.0) * hist_h)
    return rhs


def visco_step(history: HistoryBuffer, n: int, coeffs: ViscoCoefficients, matrices,
               f: TimeFunction, h: TimeFunction, grid: Grid1D, g: RelaxationKernel | np.ndarray,
               factor: ThomasFactor | None = None, history_cap: Optional[int] = None) -> np.ndarray:
    """Interior vector at level ``n + 1``; ``history`` must hold levels ``0..n``."""
    if n < 1 or history.length < n + 1:
        raise ValueError("history must hold levels 0..n with n >= 1")
    G = g if isinstance(g, np.ndarray) else kernel_table(g, grid)
    t_n = n * grid.dt
    rhs = visco_rhs(history, n, coeffs, matrices, G, float(f(t_n)), float(h(t_n + grid.dt)), grid, history_cap)
    if factor is None:
        return thomas_solve(matrices[0], rhs)
    return factor.solve(rhs)


def visco_solve(spec: ProblemSpec) -> SolutionField:
    """Full space-time field of a viscoelastic problem."""
    if spec.kind != "viscoelastic":
        raise ValidationError(f"visco_solve handles viscoelastic problems, got {spec.kind!r}")
    grid = spec.grid
    msgs = warn_compatibility(spec)
    g = spec.g
    coeffs = visco_coefficients(g, grid)
    mats = assemble_visco_matrices(coeffs, grid.nx)
    factor = ThomasFactor(mats[0])
    G = kernel_table(g, grid)
    f = sample_time_function(spec.f, grid)
    h = sample_time_function(spec.h, grid)
    dx = grid.dx

    U = np.full((grid.nx, grid.nt), np.nan)
    U0, U1 = damped_init(sample_space_function(spec.phi, grid), sample_space_function(spec.psi, grid),
                         grid, spec.init_order)
    U[:, 0] = U0
    U[:, 1] = U1
    hist = HistoryBuffer.empty(grid.nt, grid.nx - 2)
    for n in (0, 1):
        U[0, n] = f[n]
        U[-1, n] = neumann_ghost(U[-3, n], U[-2, n], h[n], dx)
        hist.append(U[1:-1, n], mats[3], h[n], f[n])

    diverged_at = None
    for n in range(1, grid.nt - 1):
        rhs = visco_rhs(hist, n, coeffs, mats, G, f[n], h[n + 1], grid, spec.history_cap)
        nxt = factor.solve(rhs)
        if not np.all(np.isfinite(nxt)):
            diverged_at = n + 1
            log.warning("viscoelastic solve diverged at time level %d", n + 1)
            break
        U[1:-1, n + 1] = nxt
        U[0, n + 1] = f[n + 1]
        U[-1, n + 1] = neumann_ghost(nxt[-2], nxt[-1], h[n + 1], dx)
        hist.append(nxt, mats[3], h[n + 1], f[n + 1])
    return SolutionField(values=U, grid=grid, diverged_at=diverged_at, warnings=tuple(msgs))
