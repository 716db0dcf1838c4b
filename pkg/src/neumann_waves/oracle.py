"""Independent reference solutions used to check the solvers.

The mixed Dirichlet-Neumann eigenbasis on ``(0, L)`` is known in closed form,
``e_k(x) = sqrt(2/L) sin((k - 1/2) pi x / L)`` with eigenvalue
``((k - 1/2) pi / L)^2``. Homogeneous problems with constant damping decouple
in this basis into scalar oscillators, which are solved exactly here.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import Grid1D, SpaceFunction, TimeFunction, RelaxationKernel

__all__ = [
    "ModalBasis",
    "mixed_eigenpairs",
    "project",
    "modal_classical_solution",
    "modal_damped_solution",
    "dense_solve_oracle",
    "convolution_oracle",
    "observed_order",
]

DEFAULT_MODES = 64
PROJECTION_REFINEMENT = 8


@dataclass(frozen=True)
class ModalBasis:
    """First ``K`` mixed eigenpairs, sampled on ``x``."""

    L: float
    K: int
    lambdas: np.ndarray
    x: np.ndarray
    samples: np.ndarray  # shape (K, len(x))

    @property
    def frequencies(self) -> np.ndarray:
        return np.sqrt(self.lambdas)

    def wavenumbers(self) -> np.ndarray:
        return (np.arange(1, self.K + 1) - 0.5) * math.pi / self.L

    def evaluate(self, x: np.ndarray, derivative: int = 0) -> np.ndarray:
        """Eigenfunctions (or their first/second derivatives) at arbitrary points, shape (K, len(x))."""
        kw = self.wavenumbers()[:, None]
        arg = kw * np.asarray(x, dtype=float)[None, :]
        c = math.sqrt(2.0 / self.L)
        if derivative == 0:
            return c * np.sin(arg)
        if derivative == 1:
            return c * kw * np.cos(arg)
        if derivative == 2:
            return -c * kw**2 * np.sin(arg)
        raise ValueError("derivative must be 0, 1 or 2")


def mixed_eigenpairs(L: float, K: int = DEFAULT_MODES, x: np.ndarray | Grid1D | None = None) -> ModalBasis:
    if K < 1:
        raise ValueError("K must be >= 1")
    if isinstance(x, Grid1D):
        x = x.x
    x = np.linspace(0.0, L, 201) if x is None else np.asarray(x, dtype=float)
    k = np.arange(1, K + 1)
    lambdas = ((k - 0.5) * math.pi / L) ** 2
    c = math.sqrt(2.0 / L)
    samples = c * np.sin(np.sqrt(lambdas)[:, None] * x[None, :])
    return ModalBasis(L=float(L), K=int(K), lambdas=lambdas, x=x, samples=samples)


def project(fn: SpaceFunction, basis: ModalBasis, n_quad: int | None = None) -> np.ndarray:
    """L2 coefficients of ``fn`` on the basis by trapezoid quadrature on a fine grid.

    The default quadrature grid is 8x finer than the basis sample grid.
    """
    if n_quad is None:
        n_quad = PROJECTION_REFINEMENT * (len(basis.x) - 1) + 1
    xq = np.linspace(0.0, basis.L, n_quad)
    return np.trapezoid(basis.evaluate(xq) * fn(xq)[None, :], xq, axis=1)


def modal_classical_solution(phi: SpaceFunction, psi: SpaceFunction, basis: ModalBasis, t: float,
                             return_velocity: bool = False):
    """Undamped homogeneous solution at time ``t`` on the basis grid."""
    return modal_damped_solution(phi, psi, 0.0, basis, t, return_velocity=return_velocity)


def _oscillator(lam: np.ndarray, a: float, u0: np.ndarray, v0: np.ndarray, t: float):
    """Exact solution and velocity of ``u'' + a u' + lam u = 0`` per mode."""
    half = 0.5 * a
    disc = lam - half**2
    decay = math.exp(-half * t)
    u = np.empty_like(u0)
    v = np.empty_like(u0)
    # slope of the oscillatory part once the decay factor is pulled out
    b = v0 + half * u0
    scale = np.maximum(lam, 1.0)
    under = disc > 1e-14 * scale
    over = disc < -1e-14 * scale
    crit = ~(under | over)

    w = np.sqrt(disc[under])
    c, s = np.cos(w * t), np.sin(w * t)
    bu, u0u = b[under], u0[under]
    u[under] = decay * (u0u * c + bu / w * s)
    v[under] = decay * (-half * (u0u * c + bu / w * s) + (-u0u * w * s + bu * c))

    m = np.sqrt(-disc[over])
    ch, sh = np.cosh(m * t), np.sinh(m * t)
    bo, u0o = b[over], u0[over]
    u[over] = decay * (u0o * ch + bo / m * sh)
    v[over] = decay * (-half * (u0o * ch + bo / m * sh) + (u0o * m * sh + bo * ch))

    bc, u0c = b[crit], u0[crit]
    u[crit] = decay * (u0c + bc * t)
    v[crit] = decay * (-half * (u0c + bc * t) + bc)
    return u, v


def modal_damped_solution(phi: SpaceFunction, psi: SpaceFunction, a_const: float, basis: ModalBasis,
                          t: float, return_velocity: bool = False):
    """Homogeneous solution with constant damping ``a_const`` at time ``t`` on the basis grid.

    Each mode follows the closed form of its branch (under-, critically or
    over-damped).
    """
    if a_const < 0:
        raise ValueError("a_const must be nonnegative")
    p = project(phi, basis)
    q = project(psi, basis)
    uk, vk = _oscillator(basis.lambdas, float(a_const), p, q, float(t))
    u = uk @ basis.samples
    if return_velocity:
        return u, vk @ basis.samples
    return u


def modal_energy(phi: SpaceFunction, psi: SpaceFunction, a_const: float, basis: ModalBasis, t: float) -> float:
    """Exact energy ``1/2 sum (lam_k u_k^2 + u_k'^2)`` of the truncated modal solution."""
    p = project(phi, basis)
    q = project(psi, basis)
    uk, vk = _oscillator(basis.lambdas, float(a_const), p, q, float(t))
    return 0.5 * float(np.sum(basis.lambdas * uk**2 + vk**2))


def dense_solve_oracle(A: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    """Gaussian elimination with partial pivoting on a dense copy of ``A``."""
    M = np.array(A, dtype=float)
    b = np.array(rhs, dtype=float)
    n = M.shape[0]
    if M.shape != (n, n) or b.shape != (n,):
        raise ValueError("dense_solve_oracle needs a square matrix and a matching vector")
    for k in range(n):
        p = k + int(np.argmax(np.abs(M[k:, k])))
        if M[p, k] == 0.0:
            raise np.linalg.LinAlgError(f"singular matrix at column {k}")
        if p != k:
            M[[k, p]] = M[[p, k]]
            b[[k, p]] = b[[p, k]]
        f = M[k + 1:, k] / M[k, k]
        M[k + 1:, k:] -= f[:, None] * M[k, k:][None, :]
        b[k + 1:] -= f * b[k]
    x = np.empty(n)
    for k in range(n - 1, -1, -1):
        x[k] = (b[k] - M[k, k + 1:] @ x[k + 1:]) / M[k, k]
    return x


def convolution_oracle(g: RelaxationKernel, phi: TimeFunction, t: float, quad_dt: float = 1e-4) -> float:
    """Fine-grid trapezoid value of ``int_0^t g(t - s) phi(s) ds``."""
    if t <= 0:
        return 0.0
    n = max(int(math.ceil(t / quad_dt)), 1)
    s = np.linspace(0.0, t, n + 1)
    return float(np.trapezoid(g(t - s) * phi(s), s))


def observed_order(steps, errors) -> float:
    """Least-squares slope of log(error) against log(step)."""
    steps = np.asarray(steps, dtype=float)
    errors = np.asarray(errors, dtype=float)
    return float(np.polyfit(np.log(steps), np.log(errors), 1)[0])


def pairwise_orders(errors, ratio: float = 2.0) -> np.ndarray:
    errors = np.asarray(errors, dtype=float)
    return np.log(errors[:-1] / errors[1:]) / math.log(ratio)
