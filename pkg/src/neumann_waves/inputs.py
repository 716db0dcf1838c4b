"""Checkers for the kernel, damping and boundary-input hypotheses.

The checks only report. Simulations are allowed (and meant) to run with
inputs that violate them.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .core import Grid1D, RelaxationKernel, SpaceFunction, TimeFunction, sample_space_function

__all__ = [
    "KernelReport",
    "DampingReport",
    "DecayHypothesisReport",
    "check_A1",
    "check_A2",
    "check_damping",
    "check_decay_hypothesis",
    "xi_canonical",
]


@dataclass(frozen=True)
class KernelReport:
    """Outcome of the kernel checks.

    ``integral_estimate`` and ``L_max`` come from :func:`check_A1`; the
    ``a2_*`` fields and ``k`` from :func:`check_A2`. Fields a check does not
    compute stay ``None``.
    """

    integral_estimate: Optional[float] = None
    L_max: Optional[float] = None
    a1_pass: Optional[bool] = None
    a2_xi_samples: Optional[np.ndarray] = field(default=None, repr=False)
    a2_monotone: Optional[bool] = None
    a2_positive: Optional[bool] = None
    k: Optional[float] = None
    offending_node: Optional[int] = None
    message: str = ""

    @property
    def a2_pass(self) -> Optional[bool]:
        if self.a2_monotone is None:
            return None
        return bool(self.a2_monotone and self.a2_positive)


@dataclass(frozen=True)
class DampingReport:
    a_min: float
    a_max: float
    positive: bool


@dataclass(frozen=True)
class DecayHypothesisReport:
    """Exponential-decay test for ``h^2`` and ``h_t^2``.

    ``gamma_estimate`` is minus the fitted slope of the log of the running tail
    supremum of ``h^2 + h_t^2``.
    """

    gamma_estimate: float
    satisfied: bool


def check_A1(g: RelaxationKernel, tail_horizon: float = 50.0, quad_dt: float = 1e-3) -> KernelReport:
    """Estimate the integral of ``g`` over the half line and the largest admissible L.

    End-corrected trapezoid quadrature on ``[0, tail_horizon]`` plus the kernel's analytic
    tail when it has one. Non-integrable kernels give a failing report.
    """
    if g.is_zero:
        return KernelReport(integral_estimate=0.0, L_max=1.0, a1_pass=True, message="g = 0")
    if tail_horizon < 10:
        raise ValueError("tail_horizon must be >= 10")
    n = int(math.ceil(tail_horizon / quad_dt))
    s = np.linspace(0.0, tail_horizon, n + 1)
    head = float(np.trapezoid(g(s), s))
    if g.has_derivative:
        # Euler-Maclaurin end correction lifts the trapezoid rule to fourth order
        step = s[1] - s[0]
        head -= step**2 / 12.0 * float(g.derivative(tail_horizon) - g.derivative(0.0))
    if g.tail is None:
        tail = 0.0
        note = "no analytic tail; quadrature truncated at the horizon"
    else:
        tail = float(g.tail(tail_horizon))
        note = ""
    if not math.isfinite(tail):
        return KernelReport(integral_estimate=math.inf, L_max=-math.inf, a1_pass=False,
                            message=f"{g.describe()} is not integrable on [0, inf)")
    total = head + tail
    L_max = 1.0 - 2.0 * total
    ok = L_max > 0
    msg = note if ok else f"1 - 2*int(g) = {L_max:.6g} <= 0"
    return KernelReport(integral_estimate=total, L_max=L_max, a1_pass=ok, message=msg)


def xi_canonical(g: RelaxationKernel, t: np.ndarray) -> np.ndarray:
    """``-g'(t)/g(t)``, with centered differences when ``g`` has no analytic derivative."""
    t = np.asarray(t, dtype=float)
    gv = np.asarray(g(t), dtype=float)
    if g.has_derivative:
        dg = np.asarray(g.derivative(t), dtype=float)
    else:
        dg = np.gradient(gv, t, edge_order=2)
    with np.errstate(divide="ignore", invalid="ignore"):
        return -dg / gv


def check_A2(g: RelaxationKernel, grid: Grid1D, tol: float = 1e-8) -> KernelReport:
    """Sample ``xi = -g'/g`` on the time grid and test that it is positive and nonincreasing."""
    t = grid.t
    gv = np.asarray(g(t), dtype=float)
    bad = np.flatnonzero(~(gv > 0))
    if bad.size:
        n0 = int(bad[0])
        return KernelReport(a2_monotone=False, a2_positive=False, offending_node=n0,
                            message=f"g({t[n0]:.6g}) = {gv[n0]:.3g} is not positive")
    xi = xi_canonical(g, t)
    jumps = np.diff(xi)
    up = np.flatnonzero(jumps > tol)
    monotone = up.size == 0
    positive = bool(np.all(xi > 0))
    dxi = np.gradient(xi, t, edge_order=2)
    k = float(np.max(np.abs(dxi / xi))) if positive else math.inf
    msg = ""
    node = None
    if not monotone:
        node = int(up[0]) + 1
        msg = f"xi increases at t = {t[node]:.6g}"
    elif not positive:
        node = int(np.flatnonzero(~(xi > 0))[0])
        msg = f"xi({t[node]:.6g}) = {xi[node]:.3g} is not positive"
    return KernelReport(a2_xi_samples=xi, a2_monotone=monotone, a2_positive=positive, k=k,
                        offending_node=node, message=msg)


def check_damping(a: SpaceFunction, grid: Grid1D) -> DampingReport:
    v = sample_space_function(a, grid)
    a_min, a_max = float(v.min()), float(v.max())
    return DampingReport(a_min=a_min, a_max=a_max, positive=a_min > 0)


def check_decay_hypothesis(h: TimeFunction, grid: Grid1D, gamma_tol: float = 1e-3) -> DecayHypothesisReport:
    """Test whether ``h^2`` and ``h_t^2`` look like ``O(exp(-gamma t))`` on the grid."""
    t = grid.t
    hv = np.asarray(h(t), dtype=float)
    if h.has_derivative:
        ht = np.asarray(h.derivative(t), dtype=float)
    else:
        ht = np.gradient(hv, t, edge_order=2)
    e = hv**2 + ht**2
    if not np.all(np.isfinite(e)):
        e = np.where(np.isfinite(e), e, np.nanmax(np.where(np.isfinite(e), e, 0.0)))
    if np.max(e) == 0.0:
        return DecayHypothesisReport(gamma_estimate=math.inf, satisfied=True)
    # running supremum over [t, T] is nonincreasing, so oscillation cannot hide growth
    tail_sup = np.maximum.accumulate(e[::-1])[::-1]
    floor = 1e-300
    slope = np.polyfit(t, np.log(np.maximum(tail_sup, floor)), 1)[0]
    gamma = -float(slope)
    return DecayHypothesisReport(gamma_estimate=gamma, satisfied=gamma > gamma_tol and tail_sup[-1] < tail_sup[0])
