"""Explicit three-level scheme for ``u_tt - u_xx + a(x) u_t = 0``.

Dirichlet datum ``f`` at ``x = 0``, Neumann datum ``h`` at ``x = L`` imposed
through a second-order backward difference. The damping term is taken as
``a_i (U_i^{n+1} - U_i^n) / dt``, which gives the update

    U_i^{n+1} = alpha_i (U_{i+1}^n + U_{i-1}^n) + beta_i U_i^n - zeta_i U_i^{n-1}

with ``alpha = r^2/(1 + a dt)``, ``beta = (2 - 2 r^2 + a dt)/(1 + a dt)`` and
``zeta = 1/(1 + a dt)``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .core import (
    Grid1D,
    ProblemSpec,
    SolutionField,
    SpaceFunction,
    ValidationError,
    sample_space_function,
    sample_time_function,
    warn_compatibility,
)

__all__ = [
    "CFLViolationError",
    "DampedCoefficients",
    "damped_coefficients",
    "damped_init",
    "neumann_ghost",
    "damped_step",
    "damped_solve",
]

log = logging.getLogger(__name__)

# r is a quotient of two rounded spacings; r = 1 grids land within a few ulps of 1
_CFL_SLACK = 1e-12


class CFLViolationError(ValidationError):
    """The explicit scheme was asked to run with dt/dx > 1."""


@dataclass(frozen=True)
class DampedCoefficients:
    """Per-node coefficients over the interior nodes ``i = 1..nx-2``."""

    alpha: np.ndarray
    beta: np.ndarray
    zeta: np.ndarray


def damped_coefficients(a_samples: np.ndarray, grid: Grid1D) -> DampedCoefficients:
    a = np.asarray(a_samples, dtype=float)
    if a.shape != (grid.nx,):
        raise ValidationError(f"a_samples must have length nx={grid.nx}")
    if np.any(a < 0):
        raise ValidationError("damping coefficient must be nonnegative")
    adt = a[1:-1] * grid.dt
    r2 = grid.r**2
    denom = 1.0 + adt
    return DampedCoefficients(alpha=r2 / denom, beta=(2.0 - 2.0 * r2 + adt) / denom, zeta=1.0 / denom)


def second_derivative(v: np.ndarray, dx: float) -> np.ndarray:
    """Centered second difference, with second-order one-sided stencils at both ends."""
    d2 = np.empty_like(v)
    d2[1:-1] = (v[2:] - 2.0 * v[1:-1] + v[:-2]) / dx**2
    d2[0] = (2.0 * v[0] - 5.0 * v[1] + 4.0 * v[2] - v[3]) / dx**2
    d2[-1] = (2.0 * v[-1] - 5.0 * v[-2] + 4.0 * v[-3] - v[-4]) / dx**2
    return d2


def damped_init(phi: np.ndarray, psi: np.ndarray, grid: Grid1D, order: str = "first",
                a_samples: np.ndarray | None = None) -> tuple[np.ndarray, np.ndarray]:
    """First two time levels from the initial displacement and velocity.

    ``order="first"`` uses ``U^1 = U^0 + dt psi``. ``order="second"`` adds the
    Taylor term ``dt^2/2 (phi'' - a psi)``.
    """
    phi = np.asarray(phi, dtype=float)
    psi = np.asarray(psi, dtype=float)
    dt = grid.dt
    U0 = phi.copy()
    if order == "first":
        U1 = U0 + dt * psi
    elif order == "second":
        a = np.zeros_like(phi) if a_samples is None else np.asarray(a_samples, dtype=float)
        U1 = U0 + dt * psi + 0.5 * dt**2 * (second_derivative(phi, grid.dx) - a * psi)
    else:
        raise ValidationError(f"order must be 'first' or 'second', got {order!r}")
    return U0, U1


def neumann_ghost(u_prev2: float, u_prev1: float, h_val: float, dx: float):
    """Boundary value at ``x = L`` from ``u_x(L) = h`` and the two nodes before it.

    Works elementwise on arrays too.
    """
    return (2.0 * dx * h_val - u_prev2 + 4.0 * u_prev1) / 3.0


def damped_step(U_n: np.ndarray, U_nm1: np.ndarray, coeffs: DampedCoefficients,
                f_n: float, h_n: float, grid: Grid1D) -> np.ndarray:
    """Advance the interior vector (nodes ``1..nx-2``) by one level.

    The boundary node ``nx-1`` is eliminated through the Neumann stencil, so
    the last row reads
    ``(beta + 4 alpha/3) U_{N-2} + (2 alpha/3) U_{N-3} + (2 alpha/3) dx h - zeta U_{N-2}^{n-1}``.
    """
    al, be, ze = coeffs.alpha, coeffs.beta, coeffs.zeta
    out = be * U_n - ze * U_nm1
    out[:-1] += al[:-1] * U_n[1:]
    out[1:] += al[1:] * U_n[:-1]
    out[0] += al[0] * f_n
    out[-1] += al[-1] * (U_n[-1] * (4.0 / 3.0) + (2.0 / 3.0) * grid.dx * h_n - U_n[-2] / 3.0)
    return out


def _check_cfl(spec: ProblemSpec) -> None:
    r = spec.grid.r
    if r > 1.0 + _CFL_SLACK:
        if not spec.allow_cfl_violation:
            raise CFLViolationError(
                f"explicit scheme needs dt/dx <= 1, got r = {r:.6g}; set allow_cfl_violation to run anyway")
        log.warning("running explicit scheme with r = %.6g > 1", r)


def damped_solve(spec: ProblemSpec) -> SolutionField:
    """Full space-time field of a classical or damped problem."""
    if spec.kind not in ("classical", "damped"):
        raise ValidationError(f"damped_solve handles classical/damped problems, got {spec.kind!r}")
    _check_cfl(spec)
    grid = spec.grid
    msgs = warn_compatibility(spec)
    a = np.zeros(grid.nx) if spec.a is None else sample_space_function(spec.a, grid)
    coeffs = damped_coefficients(a, grid)
    f = sample_time_function(spec.f, grid)
    h = sample_time_function(spec.h, grid)
    dx = grid.dx

    U = np.full((grid.nx, grid.nt), np.nan)
    U0, U1 = damped_init(sample_space_function(spec.phi, grid), sample_space_function(spec.psi, grid),
                         grid, spec.init_order, a)
    U[:, 0] = U0
    U[:, 1] = U1
    for n in (0, 1):
        U[0, n] = f[n]
        U[-1, n] = neumann_ghost(U[-3, n], U[-2, n], h[n], dx)

    diverged_at = None
    prev, cur = U[1:-1, 0].copy(), U[1:-1, 1].copy()
    for n in range(1, grid.nt - 1):
        with np.errstate(over="ignore", invalid="ignore"):
            nxt = damped_step(cur, prev, coeffs, f[n], h[n], grid)
        if not np.all(np.isfinite(nxt)):
            diverged_at = n + 1
            log.warning("damped solve diverged at time level %d", n + 1)
            break
        U[1:-1, n + 1] = nxt
        U[0, n + 1] = f[n + 1]
        U[-1, n + 1] = neumann_ghost(nxt[-2], nxt[-1], h[n + 1], dx)
        prev, cur = cur, nxt
    return SolutionField(values=U, grid=grid, diverged_at=diverged_at, warnings=tuple(msgs))


def damped_problem(grid: Grid1D, phi: SpaceFunction, psi: SpaceFunction, a: SpaceFunction | None = None,
                   **kw) -> ProblemSpec:
    """Shorthand: classical problem when ``a`` is None, damped otherwise."""
    kind = "classical" if a is None else "damped"
    return ProblemSpec(kind=kind, grid=grid, phi=phi, psi=psi, a=a, **kw)
