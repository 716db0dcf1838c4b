"""Theoretical decay envelopes and exponential fits of measured energies.

The decay estimates assert that constants exist but never give their values. Here
those constants are parameters. Each envelope can be calibrated so that it
matches the measured energy at ``t = 0`` (times ``1 + margin``), which makes
the *shape* of the bound testable against a simulation.

Time integrals are composite trapezoid sums with one Richardson step
(trapezoid at ``q`` and ``2q`` combined), i.e. fourth-order accurate.
Convolutions inside the viscoelastic ``H`` use plain trapezoid sums.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from .core import Grid1D, RelaxationKernel, SpaceFunction, TimeFunction, ValidationError
from .energy import EnergySeries
from .inputs import check_A1, xi_canonical

__all__ = [
    "BoundUndefinedError",
    "FitDomainError",
    "DataNorms",
    "data_norms",
    "DampedBoundParams",
    "ViscoBoundParams",
    "BoundCurve",
    "DecayFit",
    "poincare_constant",
    "eps_zero",
    "damped_H_terms",
    "damped_H",
    "damped_bound_curve",
    "memory_exponent",
    "visco_envelope",
    "decay_fit",
]


class BoundUndefinedError(ValidationError):
    """The hypotheses of a bound fail, so the bound has no meaning."""


class FitDomainError(ValidationError):
    """The energy series cannot be log-fitted on the requested window."""


# --------------------------------------------------------------------------
# quadrature helpers
# --------------------------------------------------------------------------


def _fine_nodes(times: np.ndarray, quad_dt: float) -> tuple[np.ndarray, np.ndarray]:
    """Uniform fine grid from 0 to ``times[-1]`` on which every ``times[j]`` is an even node.

    ``times`` must be uniform and start at 0 (a grid's time axis) or be a single value.
    """
    times = np.asarray(times, dtype=float)
    if times.size == 1:
        t = float(times[0])
        m = max(2, 2 * math.ceil(t / (2.0 * quad_dt))) if t > 0 else 2
        return np.linspace(0.0, t, m + 1), np.array([m if t > 0 else 0])
    step = times[1] - times[0]
    if times[0] != 0.0 or not np.allclose(np.diff(times), step, rtol=1e-9, atol=0.0):
        raise ValueError("times must be uniform and start at 0")
    m = max(2, 2 * math.ceil(step / (2.0 * quad_dt)))
    s = np.linspace(0.0, times[-1], m * (times.size - 1) + 1)
    return s, np.arange(times.size) * m


def _cumulative(vals: np.ndarray, step: float) -> np.ndarray:
    """Running integral at the even nodes: trapezoid at ``step`` and ``2 step`` plus one Richardson step."""
    fine = np.concatenate(([0.0], np.cumsum(0.5 * (vals[1:] + vals[:-1])) * step))[::2]
    ev = vals[::2]
    coarse = np.concatenate(([0.0], np.cumsum(0.5 * (ev[1:] + ev[:-1])) * 2.0 * step))
    return (4.0 * fine - coarse) / 3.0


def _at(cum_even: np.ndarray, idx: np.ndarray) -> np.ndarray:
    return cum_even[idx // 2]


def _running(times: np.ndarray, integrand, quad_dt: float) -> np.ndarray:
    """``int_0^t integrand`` at each ``t``; one shared fine grid when ``times`` is a uniform axis from 0."""
    try:
        s, idx = _fine_nodes(times, quad_dt)
    except ValueError:
        return np.array([_running(np.array([t]), integrand, quad_dt)[0] for t in times])
    if s.size < 3 or s[-1] == 0.0:
        return np.zeros(times.shape)
    return _at(_cumulative(integrand(s), s[1] - s[0]), idx)


def _time_derivative(fn, s: np.ndarray) -> np.ndarray:
    if fn.has_derivative:
        return np.asarray(fn.derivative(s), dtype=float)
    return np.gradient(np.asarray(fn(s), dtype=float), s, edge_order=2)


# --------------------------------------------------------------------------
# data norms
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class DataNorms:
    """Squared norms of the initial data: ``||u0_x||^2``, ``||u0||^2``, ``||u1||^2``."""

    grad_sq: float
    l2_sq: float
    vel_sq: float

    @property
    def h1_sq(self) -> float:
        return self.grad_sq + self.l2_sq


def data_norms(phi: SpaceFunction, psi: SpaceFunction, L: float, n_quad: int = 20001) -> DataNorms:
    """Trapezoid norms on a fine grid; ``phi'`` by differences when it has no closed form."""
    x = np.linspace(0.0, L, n_quad)
    u0 = np.asarray(phi(x), dtype=float)
    u1 = np.asarray(psi(x), dtype=float)
    du0 = np.asarray(phi.derivative(x), dtype=float) if phi.has_derivative else np.gradient(u0, x, edge_order=2)
    return DataNorms(grad_sq=float(np.trapezoid(du0**2, x)), l2_sq=float(np.trapezoid(u0**2, x)),
                     vel_sq=float(np.trapezoid(u1**2, x)))


# --------------------------------------------------------------------------
# damped bound
# --------------------------------------------------------------------------


def poincare_constant(L: float) -> float:
    """Sharp constant in ``||u||^2 <= c_p ||u_x||^2`` for ``u(0) = 0`` on ``(0, L)``."""
    if not L > 0:
        raise ValidationError("L must be positive")
    return (2.0 * L / math.pi) ** 2


def eps_zero(a_min: float, a_max: float, c_p: float) -> float:
    if not a_min > 0:
        raise BoundUndefinedError(f"damping must be bounded below by a positive constant, got a_min = {a_min:g}")
    if a_max < a_min or not c_p > 0:
        raise ValidationError("need a_max >= a_min and c_p > 0")
    return min(a_min / 4.0, a_min / (2.0 * a_max**2 * c_p))


@dataclass(frozen=True)
class DampedBoundParams:
    """Constants of the damped envelope ``c exp(-2 alpha t) exp(delta1 t) H(t)``.

    Use :meth:`build`, which fills the defaults: ``eps = eps0``,
    ``eta = eps/(4 c_p (1 + eps))`` (midpoint of its range), hence
    ``alpha = eps/2 - eta c_p (1 + eps) = eps0/4``, and ``delta = 1/(10 c_p)``,
    which makes ``delta1 = alpha/2`` for every ``alpha``.
    """

    a_min: float
    a_max: float
    c_p: float
    eps0: float
    alpha: float
    delta: float
    delta1: float
    c: float = 1.0
    eta: Optional[float] = None

    def __post_init__(self) -> None:
        if not (0.0 < self.alpha < self.eps0 / 2.0):
            raise ValidationError(f"alpha must lie in (0, eps0/2) = (0, {self.eps0 / 2:.6g}), got {self.alpha:g}")
        if not (0.0 < self.delta < 1.0 / (2.0 * self.c_p)):
            raise ValidationError(f"delta must lie in (0, 1/(2 c_p)) = (0, {0.5 / self.c_p:.6g}), got {self.delta:g}")
        if not self.c >= 0:
            raise ValidationError("c must be nonnegative")

    @classmethod
    def build(cls, a_min: float, a_max: float, L: float, alpha: Optional[float] = None,
              delta: Optional[float] = None, c: float = 1.0) -> "DampedBoundParams":
        c_p = poincare_constant(L)
        e0 = eps_zero(a_min, a_max, c_p)
        eta = e0 / (4.0 * c_p * (1.0 + e0))
        if alpha is None:
            alpha = e0 / 2.0 - eta * c_p * (1.0 + e0)
        if delta is None:
            delta = 1.0 / (10.0 * c_p)
        delta1 = 4.0 * delta * alpha * c_p / (1.0 - 2.0 * delta * c_p)
        return cls(a_min=a_min, a_max=a_max, c_p=c_p, eps0=e0, alpha=alpha, delta=delta,
                   delta1=delta1, c=c, eta=eta)

    @property
    def net_rate(self) -> float:
        """``2 alpha - delta1``; the envelope decays (for decaying H) only when this is positive."""
        return 2.0 * self.alpha - self.delta1


def damped_H_terms(t, h: TimeFunction, norms: DataNorms, alpha: float, quad_dt: float = 1e-3) -> dict:
    """The six summands of ``H(t)``, each an array over ``t``.

    Keys: ``data`` (``||u0||_H1^2 + ||u1||^2``), ``weighted``
    (``int_0^t e^{2 alpha s}(h^2 + h_t^2) ds``), ``endpoint``
    (``e^{2 alpha t} h(t)^2``), ``initial`` (``h(0)^2``) and ``plain``
    (``int_0^t h^2 ds``). In 1D the boundary norms are point values.
    """
    times = np.atleast_1d(np.asarray(t, dtype=float))
    if np.any(times < 0):
        raise ValueError("t must be nonnegative")

    def weighted_integrand(s):
        return np.exp(2.0 * alpha * s) * (np.asarray(h(s), dtype=float) ** 2 + _time_derivative(h, s) ** 2)

    weighted = _running(times, weighted_integrand, quad_dt)
    plain = _running(times, lambda s: np.asarray(h(s), dtype=float) ** 2, quad_dt)
    h_t = np.asarray(h(times), dtype=float)
    h0 = float(h(0.0))
    return {
        "data": np.full(times.shape, norms.h1_sq + norms.vel_sq),
        "weighted": weighted,
        "endpoint": np.exp(2.0 * alpha * times) * h_t**2,
        "initial": np.full(times.shape, h0**2),
        "plain": plain,
    }


def damped_H(t, h: TimeFunction, norms: DataNorms, alpha: float, quad_dt: float = 1e-3):
    """``H(t)`` of the damped bound; scalar in, scalar out."""
    terms = damped_H_terms(t, h, norms, alpha, quad_dt)
    total = sum(terms.values())
    return float(total[0]) if np.ndim(t) == 0 else total


@dataclass(frozen=True)
class BoundCurve:
    """An evaluated envelope. ``H_samples`` holds ``H`` (damped) or ``H~`` (viscoelastic)."""

    times: np.ndarray
    envelope: np.ndarray
    params: object
    H_samples: np.ndarray
    exponent: Optional[np.ndarray] = field(default=None, repr=False)

    def dominates(self, series: EnergySeries, rtol: float = 0.0) -> bool:
        env = np.interp(series.times, self.times, self.envelope)
        return bool(np.all(env * (1.0 + rtol) >= series.values))


def _calibration_scale(env0: float, e0: float, margin: float) -> Optional[float]:
    if env0 <= 0:
        return None
    return e0 * (1.0 + margin) / env0


def damped_bound_curve(params: DampedBoundParams, h: TimeFunction, norms: DataNorms, grid: Grid1D,
                       energy: Optional[EnergySeries] = None, margin: float = 0.05,
                       quad_dt: Optional[float] = None) -> BoundCurve:
    """``c e^{-2 alpha t} e^{delta1 t} H(t)`` on the grid's time axis.

    With ``energy`` given, ``c`` is replaced so the envelope starts at
    ``energy(0) * (1 + margin)``.
    """
    t = grid.t
    qd = grid.dt / 2.0 if quad_dt is None else quad_dt
    H = damped_H(t, h, norms, params.alpha, qd)
    shape = np.exp((params.delta1 - 2.0 * params.alpha) * t) * H
    if energy is not None:
        c = _calibration_scale(float(shape[0]), float(energy.values[0]), margin)
        if c is not None:
            params = replace(params, c=c)
    return BoundCurve(times=t, envelope=params.c * shape, params=params, H_samples=H)


# --------------------------------------------------------------------------
# viscoelastic envelope
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class ViscoBoundParams:
    """User constants of the viscoelastic envelope.

    ``c`` is the generic constant of the estimates, ``kappa`` the rate constant
    (it absorbs the undefined ``M``), ``L_kernel`` the constant of the kernel
    integrability assumption (defaults to half of ``1 - 2 int g``).
    ``c_eps`` defaults to ``eps c (1 + 2 g(0))``.
    """

    eps: float = 0.1
    eps1: float = 0.1
    eps2: float = 0.1
    c: float = 1.0
    kappa: float = 0.05
    alpha2: float = 1.0
    xi_floor: float = 1e-3
    L_kernel: Optional[float] = None
    c_eps: Optional[float] = None

    def __post_init__(self) -> None:
        if min(self.eps, self.eps1, self.eps2, self.c, self.kappa, self.alpha2) <= 0:
            raise ValidationError("eps, eps1, eps2, c, kappa and alpha2 must be positive")
        if self.xi_floor < 0:
            raise ValidationError("xi_floor must be nonnegative")
        if 1.0 - 2.0 * self.eps * self.c <= 0:
            raise BoundUndefinedError(f"need 1 - 2 eps c > 0, got eps c = {self.eps * self.c:g}")

    @property
    def alpha3(self) -> float:
        return self.alpha2 / (1.0 - 2.0 * self.eps * self.c)

    @property
    def gronwall_factor(self) -> float:
        """``2 eps c/(1 - 2 eps c) - 1``, the multiplier of the exponent integral."""
        ec = self.eps * self.c
        return 2.0 * ec / (1.0 - 2.0 * ec) - 1.0

    def resolved(self, g: RelaxationKernel) -> "ViscoBoundParams":
        upd = {}
        if self.c_eps is None:
            upd["c_eps"] = self.eps * self.c * (1.0 + 2.0 * float(g(0.0)))
        if self.L_kernel is None:
            rep = check_A1(g)
            if not rep.a1_pass:
                raise BoundUndefinedError(f"kernel fails the integrability assumption: {rep.message}")
            upd["L_kernel"] = 0.5 * rep.L_max
        return replace(self, **upd) if upd else self


def _xi(g: RelaxationKernel, s: np.ndarray, floor: float) -> np.ndarray:
    xi = xi_canonical(g, s)
    xi = np.where(np.isfinite(xi), xi, floor)
    return np.maximum(xi, floor)


def memory_exponent(g: RelaxationKernel, t, kappa: float, c_eps: float, xi_floor: float = 0.0,
                    quad_dt: float = 1e-3) -> np.ndarray:
    """``int_0^t (kappa max(xi, xi_floor) - c_eps) ds`` with ``xi = -g'/g``."""
    times = np.atleast_1d(np.asarray(t, dtype=float))
    return _running(times, lambda s: kappa * _xi(g, s, xi_floor) - c_eps, quad_dt)


def _causal_conv(a: np.ndarray, b: np.ndarray, step: float) -> np.ndarray:
    """Trapezoid ``int_0^{s_j} a(s_j - tau) b(tau) dtau`` for every fine node ``s_j``."""
    full = np.convolve(a, b)[: a.size]
    return step * (full - 0.5 * (a * b[0] + a[0] * b))


def visco_envelope(g: RelaxationKernel, h: TimeFunction, grid: Grid1D, norms: DataNorms,
                   params: ViscoBoundParams = ViscoBoundParams(), energy: Optional[EnergySeries] = None,
                   margin: float = 0.05, quad_refine: int = 2) -> BoundCurve:
    """``alpha3 exp((2 eps c/(1 - 2 eps c) - 1) int_0^t (kappa xi - c_eps)) H~(t)`` on the grid.

    ``H~`` is assembled term by term from its definition, with boundary norms
    reduced to point values at ``x = L`` and ``(g o h)(t)`` read as
    ``int_0^t g(t - s)(h(t) - h(s))^2 ds``. With ``energy`` given, ``alpha2``
    is replaced so the envelope starts at ``energy(0) * (1 + margin)``.
    """
    p = params.resolved(g)
    if quad_refine < 1:
        raise ValueError("quad_refine must be >= 1")
    t = grid.t
    s, idx = _fine_nodes(t, grid.dt / quad_refine)
    step = s[1] - s[0]
    four_eps = 4.0 * p.eps

    xi = _xi(g, s, p.xi_floor)
    q = p.kappa * xi - p.c_eps
    Q = np.concatenate(([0.0], np.cumsum(0.5 * (q[1:] + q[:-1])) * step))
    eQ = np.exp(Q)

    hs = np.asarray(h(s), dtype=float)
    hts = _time_derivative(h, s)
    h2 = hs**2
    if np.any(hs != 0):
        G = np.asarray(g(s), dtype=float)
        dG = _time_derivative(g, s)
        conv_g_h2 = _causal_conv(G, h2, step)
        conv_dg_h2 = _causal_conv(dG, h2, step)
        # g o h expanded: h(t)^2 int g - 2 h(t) (g * h) + (g * h^2)
        int_g = np.concatenate(([0.0], np.cumsum(0.5 * (G[1:] + G[:-1])) * step))
        g_circ_h = np.maximum(h2 * int_g - 2.0 * hs * _causal_conv(G, hs, step) + conv_g_h2, 0.0)
    else:
        conv_g_h2 = conv_dg_h2 = g_circ_h = np.zeros_like(s)

    g0 = float(g(0.0))
    H = ((g0 / four_eps + p.c * p.eps1 * xi + p.c * p.eps2 * xi) * h2 + hts**2 / four_eps
         + p.c * p.eps1 * xi * conv_g_h2 - conv_dg_h2 / four_eps + p.c * p.eps2 * xi * g_circ_h)
    one_m_L = 1.0 - p.L_kernel
    h_tilde = (((one_m_L**2 + 1.0) * h2) + one_m_L * g_circ_h) / four_eps

    xi0 = float(xi[0])
    C0 = (float(h(0.0)) ** 2 + 0.5 * (1.0 + p.c**2) * norms.grad_sq + 0.5 * p.eps1 * xi0 * norms.l2_sq
          + 0.5 * (1.0 + p.eps1 * xi0) * norms.vel_sq)

    with np.errstate(over="ignore", invalid="ignore"):
        Ht = (_at(_cumulative(eQ * H, step), idx)
              + eQ[idx] * h2[idx] / four_eps
              + _at(_cumulative(q * eQ * h2, step), idx) / four_eps
              + eQ[idx] * h_tilde[idx] / four_eps
              + _at(_cumulative(q * eQ * h_tilde, step), idx) / four_eps
              + C0)
        exponent = p.gronwall_factor * Q[idx]
        shape = np.exp(exponent) * Ht / (1.0 - 2.0 * p.eps * p.c)

    if energy is not None and shape[0] > 0:
        p = replace(p, alpha2=float(energy.values[0]) * (1.0 + margin) / float(shape[0]))
    return BoundCurve(times=t, envelope=p.alpha2 * shape, params=p, H_samples=Ht, exponent=exponent)


# --------------------------------------------------------------------------
# fits
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class DecayFit:
    """Least-squares fit ``ln E(t) ~ intercept - rate t`` on ``window``."""

    rate: float
    intercept: float
    window: tuple
    r_squared: float
    samples: int

    @property
    def lambda_(self) -> float:
        return self.rate


def decay_fit(series: EnergySeries, window: Optional[tuple] = None) -> DecayFit:
    """Exponential rate of ``series`` on ``window`` (default ``[T/2, T]``)."""
    times, vals = np.asarray(series.times), np.asarray(series.values)
    if window is None:
        window = (0.5 * times[-1], times[-1])
    t_a, t_b = float(window[0]), float(window[1])
    if t_a >= t_b or t_a < times[0] - 1e-12 or t_b > times[-1] + 1e-12:
        raise FitDomainError(f"window [{t_a:g}, {t_b:g}] is not inside [{times[0]:g}, {times[-1]:g}]")
    m = (times >= t_a) & (times <= t_b)
    tw, vw = times[m], vals[m]
    if tw.size < 2:
        raise FitDomainError("fewer than two samples in the window")
    if not np.all(np.isfinite(vw)) or np.any(vw <= 0):
        bad = tw[~(np.isfinite(vw) & (vw > 0))][0]
        raise FitDomainError(f"energy is not positive at t = {bad:g}; shrink the window to end before it")
    y = np.log(vw)
    slope, icept = np.polyfit(tw, y, 1)
    resid = y - (slope * tw + icept)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    ss_res = float(np.sum(resid**2))
    if ss_tot <= 1e-300 * max(1, y.size):
        r2 = 1.0
    else:
        r2 = min(max(1.0 - ss_res / ss_tot, 0.0), 1.0)
    return DecayFit(rate=float(-slope), intercept=float(icept), window=(t_a, t_b), r_squared=r2,
                    samples=int(tw.size))
