"""Discrete energies of a computed field and residuals of the energy-rate identities.

Spatial integrals use the trapezoid rule; ``u_x`` uses centered differences
(second-order one-sided at the ends); ``u_t`` at level ``n`` is the backward
difference ``(U^n - U^{n-1})/dt``, forward only at ``n = 0``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .core import RelaxationKernel, SolutionField, SpaceFunction, TimeFunction, sample_space_function

__all__ = [
    "EnergySeries",
    "discrete_gradient",
    "velocity",
    "energy_damped",
    "g_circ_grad",
    "energy_modified",
    "energy_rate_residual",
]

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class EnergySeries:
    """Energy samples ``values[j]`` at ``times[j]``.

    ``levels`` are the grid time indices the samples were taken at.
    ``components`` maps ``kinetic``, ``potential`` and (modified energy only)
    ``history`` to their share of the total.
    """

    times: np.ndarray
    values: np.ndarray
    kind: str
    levels: np.ndarray
    components: dict = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.times)

    def window(self, t_a: float, t_b: float) -> "EnergySeries":
        m = (self.times >= t_a) & (self.times <= t_b)
        return EnergySeries(self.times[m], self.values[m], self.kind, self.levels[m],
                            {k: v[m] for k, v in self.components.items()})


def discrete_gradient(col: np.ndarray, dx: float) -> np.ndarray:
    """Second-order ``u_x``; also works column-wise on a 2D (nx, n) array."""
    col = np.asarray(col, dtype=float)
    if col.shape[0] < 3:
        raise ValueError("need at least 3 points")
    return np.gradient(col, dx, axis=0, edge_order=2)


def velocity(values: np.ndarray, dt: float) -> np.ndarray:
    v = np.empty_like(values)
    v[:, 1:] = (values[:, 1:] - values[:, :-1]) / dt
    v[:, 0] = (values[:, 1] - values[:, 0]) / dt
    return v


def _levels(field_: SolutionField, stride: int) -> np.ndarray:
    n_ok = field_.valid_levels
    lv = np.arange(0, n_ok, stride)
    if lv[-1] != n_ok - 1:
        lv = np.append(lv, n_ok - 1)
    return lv


def _l2sq(u: np.ndarray, x: np.ndarray) -> np.ndarray:
    return np.trapezoid(u * u, x, axis=0)


def energy_damped(field_: SolutionField, stride: int = 1) -> EnergySeries:
    """``1/2 ||u_x||^2 + 1/2 ||u_t||^2`` at every ``stride``-th level (last level always kept)."""
    grid = field_.grid
    if field_.valid_levels < 2:
        raise ValueError("need at least two finite time levels")
    U = field_.values[:, : field_.valid_levels]
    lv = _levels(field_, stride)
    x = grid.x
    pot = 0.5 * _l2sq(discrete_gradient(U[:, lv], grid.dx), x)
    kin = 0.5 * _l2sq(velocity(U, grid.dt)[:, lv], x)
    return EnergySeries(times=grid.t[lv], values=pot + kin, kind="damped", levels=lv,
                        components={"kinetic": kin, "potential": pot})


def _history_pairing(ux: np.ndarray, n: int, G: np.ndarray, x: np.ndarray, dt: float) -> float:
    if n == 0:
        return 0.0
    diff = ux[:, : n + 1] - ux[:, n : n + 1]
    norms = _l2sq(diff, x)
    # g(t_n - t_m) for m = 0..n
    return float(np.trapezoid(G[n::-1] * norms, dx=dt))


def g_circ_grad(field_: SolutionField, n: int, g: RelaxationKernel) -> float:
    """``int_0^{t_n} g(t_n - s) ||u_x(t_n) - u_x(s)||^2 ds`` by the trapezoid rule in ``s``."""
    grid = field_.grid
    if n < 1:
        raise ValueError("n must be >= 1")
    ux = discrete_gradient(field_.values[:, : n + 1], grid.dx)
    G = np.asarray(g(np.arange(n + 1) * grid.dt), dtype=float)
    return _history_pairing(ux, n, G, grid.x, grid.dt)


def _running_integral(G: np.ndarray, dt: float) -> np.ndarray:
    out = np.zeros_like(G)
    out[1:] = np.cumsum(0.5 * (G[1:] + G[:-1])) * dt
    return out


def energy_modified(field_: SolutionField, g: RelaxationKernel, stride: int = 1) -> EnergySeries:
    """Viscoelastic energy
    ``1/2 (1 - int_0^t g) ||u_x||^2 + 1/2 ||u_t||^2 + 1/2 (g o u_x)(t)``.

    The history term costs ``O(n nx)`` per sample; ``stride`` thins the time
    levels it is evaluated at.
    """
    grid = field_.grid
    if field_.valid_levels < 2:
        raise ValueError("need at least two finite time levels")
    U = field_.values[:, : field_.valid_levels]
    lv = _levels(field_, stride)
    x = grid.x
    G = np.asarray(g(np.arange(grid.nt) * grid.dt), dtype=float)
    weight = 1.0 - _running_integral(G, grid.dt)[lv]
    if np.any(weight <= 0):
        log.warning("1 - int_0^t g <= 0 on part of the run; modified energy may be negative")
    ux = discrete_gradient(U, grid.dx)
    pot = 0.5 * weight * _l2sq(ux[:, lv], x)
    kin = 0.5 * _l2sq(velocity(U, grid.dt)[:, lv], x)
    if g.is_zero:
        hist = np.zeros_like(kin)
    else:
        hist = 0.5 * np.array([_history_pairing(ux, int(n), G, x, grid.dt) for n in lv])
    return EnergySeries(times=grid.t[lv], values=pot + kin + hist, kind="modified", levels=lv,
                        components={"kinetic": kin, "potential": pot, "history": hist})


def energy_rate_residual(field_: SolutionField, series: EnergySeries, h: TimeFunction,
                         a: Optional[SpaceFunction] = None, g: Optional[RelaxationKernel] = None) -> np.ndarray:
    """Mismatch between the discrete energy rate and the continuous identity.

    For a damped (or classical) field, level ``n`` gives
    ``(E^n - E^{n-1})/dt + int a u_t^2 - h(t_n) u_t(L, t_n)``.
    For a viscoelastic field (``g`` given) the right side is
    ``1/2 (g' o u_x) - 1/2 g ||u_x||^2 + u_t(L) (h - int_0^t g(t-s) h(s) ds)``.
    ``g'`` falls back to centered differences when the kernel has none.

    ``series`` must be sampled at every level (``stride=1``); the result has
    one entry per level ``n = 1..len(series)-1``.
    """
    grid = field_.grid
    lv = series.levels
    if len(lv) < 2 or np.any(np.diff(lv) != 1):
        raise ValueError("residual needs an energy series sampled at consecutive levels")
    nlev = int(lv[-1]) + 1
    U = field_.values[:, :nlev]
    dt, x = grid.dt, grid.x
    t = grid.t[:nlev]
    ut = velocity(U, dt)
    rate = np.diff(series.values) / dt
    hv = np.asarray(h(t), dtype=float)
    flux = hv * ut[-1]

    if g is None:
        av = np.zeros(grid.nx) if a is None else sample_space_function(a, grid)
        source = -np.trapezoid(av[:, None] * ut * ut, x, axis=0) + flux
        return rate - source[1:]

    G = np.asarray(g(t), dtype=float)
    if g.has_derivative:
        dG = np.asarray(g.derivative(t), dtype=float)
    else:
        dG = np.gradient(G, dt, edge_order=2)
    ux = discrete_gradient(U, grid.dx)
    source = np.empty(nlev)
    for n in range(nlev):
        if n == 0:
            gprime_pair = 0.0
            mem_h = 0.0
        else:
            gprime_pair = _history_pairing(ux, n, dG, x, dt)
            mem_h = float(np.trapezoid(G[n::-1] * hv[: n + 1], dx=dt))
        source[n] = (0.5 * gprime_pair - 0.5 * G[n] * _l2sq(ux[:, n], x)
                     + ut[-1, n] * (hv[n] - mem_h))
    return rate - source[1:]
