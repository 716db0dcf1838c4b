import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from neumann_waves.core import ProblemSpec, RelaxationKernel, SpaceFunction, TimeFunction, build_grid
from neumann_waves.damped import neumann_ghost
from neumann_waves.oracle import dense_solve_oracle
from neumann_waves.viscoelastic import (
    HistoryBuffer,
    SingularSystemError,
    ThomasFactor,
    Tridiagonal,
    assemble_visco_matrices,
    kernel_table,
    memory_quadrature,
    memory_weights,
    thomas_solve,
    visco_coefficients,
    visco_solve,
    visco_step,
)


def test_coefficients_exp_shift():
    grid = build_grid(1.0, 1.0, 11, 11)  # dt = 0.1
    co = visco_coefficients(RelaxationKernel.exp_shift(), grid)
    e = math.exp
    assert co.delta == pytest.approx(0.05)
    assert co.a == pytest.approx(0.05 * e(-1.0), rel=1e-14)
    assert co.a == pytest.approx(0.0183940, abs=1e-7)
    assert co.b == pytest.approx(0.05 * (e(-1.0) + e(-1.1)), rel=1e-14)
    assert co.c == pytest.approx(0.05 * (e(-1.0) + 4 * e(-1.1) + 2 * e(-1.2)), rel=1e-14)


def test_memory_weights_examples():
    grid = build_grid(1.0, 1.0, 11, 11)
    g = RelaxationKernel.exp_shift()
    e = lambda k: math.exp(-(1.0 + 0.1 * k))
    w0, w = memory_weights(1, g, grid)
    assert w0 == pytest.approx(e(0) + 2 * e(1) + e(2), rel=1e-14)
    assert w.size == 0
    w0, w = memory_weights(5, g, grid)
    assert w0 == pytest.approx(e(4) + 2 * e(5) + e(6), rel=1e-14)
    # m = 1, 2, 3 sit at lags 4, 3, 2
    assert w == pytest.approx([e(3) + 2 * e(4) + e(5), e(2) + 2 * e(3) + e(4), e(1) + 2 * e(2) + e(3)], rel=1e-14)
    G = kernel_table(g, grid)
    w0t, wt = memory_weights(5, G, grid)
    assert w0t == w0 and np.array_equal(wt, w)
    with pytest.raises(ValueError):
        memory_weights(0, g, grid)


def test_thomas_example():
    A = Tridiagonal(sub=np.array([-1.0, -1.0]), diag=np.array([2.0, 2.0, 2.0]), sup=np.array([-1.0, -1.0]))
    x = thomas_solve(A, np.array([1.0, 0.0, 0.0]))
    assert x == pytest.approx([0.75, 0.5, 0.25], abs=1e-15)


def test_thomas_zero_pivot():
    A = Tridiagonal(sub=np.array([1.0]), diag=np.array([0.0, 1.0]), sup=np.array([1.0]))
    with pytest.raises(SingularSystemError):
        thomas_solve(A, np.ones(2))
    A = Tridiagonal(sub=np.array([1.0]), diag=np.array([1.0, 1.0]), sup=np.array([1.0]))
    with pytest.raises(SingularSystemError):
        ThomasFactor(A)


@given(st.integers(4, 40), st.integers(0, 2**31 - 1))
def test_thomas_matches_dense(m, seed):
    rng = np.random.default_rng(seed)
    sub, sup = rng.uniform(-1, 1, m - 1), rng.uniform(-1, 1, m - 1)
    diag = 3.0 + rng.uniform(0, 1, m)
    A = Tridiagonal(sub=sub, diag=diag, sup=sup)
    rhs = rng.standard_normal(m)
    assert np.allclose(thomas_solve(A, rhs), dense_solve_oracle(A.to_dense(), rhs), atol=1e-12)


def test_matrix_last_rows_and_dominance():
    grid = build_grid(10 * math.pi, 20.0, 101, 201)
    co = visco_coefficients(RelaxationKernel.exp_shift(), grid)
    K, K1, K2, K3 = assemble_visco_matrices(co, grid.nx)
    ir2 = 1.0 / co.r**2
    assert K.diag[-1] == pytest.approx(4 * ir2 + 2 / 3 * (1 - co.a))
    assert K.sub[-1] == pytest.approx(-2 / 3 * (1 - co.a))
    assert K1.diag[-1] == pytest.approx(4 * ir2 - 2 / 3 * (1 - co.b))
    # same sign as the interior diagonal of K''
    assert K2.diag[-1] == pytest.approx(-(4 * ir2 + 2 / 3 * (1 - co.c)))
    assert np.sign(K2.diag[-1]) == np.sign(K2.diag[0])
    assert (K3.diag[-1], K3.sub[-1]) == (-2 / 3, 2 / 3)
    assert K.is_diagonally_dominant()


def test_matrices_need_four_nodes():
    from neumann_waves.core import ValidationError

    co = visco_coefficients(RelaxationKernel.exp_shift(), build_grid(1.0, 1.0, 11, 11))
    with pytest.raises(ValidationError):
        assemble_visco_matrices(co, 3)


# brute force: rebuild the three-level average from the trapezoid memory and solve densely

def _full(col, f_val, h_val, dx):
    u = np.concatenate([[f_val], col, [0.0]])
    u[-1] = neumann_ghost(u[-3], u[-2], h_val, dx)
    return u


def _lap(u, dx):
    return (u[2:] - 2 * u[1:-1] + u[:-2]) / dx**2


def _memory(k, laps, G, dt, first=1):
    """dt [g0/2 L U^k + g(t_k)/2 L U^0 + sum_{m=first}^{k-1} g(t_k - t_m) L U^m]."""
    out = 0.5 * G[0] * laps[k] + 0.5 * G[k] * laps[0]
    for m in range(first, k):
        out = out + G[k - m] * laps[m]
    return dt * out


def _brute_force_next(cols, n, f_val, h, g, grid):
    dx, dt = grid.dx, grid.dt
    G = np.asarray(g(np.arange(n + 2) * dt), dtype=float)
    hv = h(grid.t[: n + 2])
    laps = [_lap(_full(cols[k], f_val, hv[k], dx), dx) for k in range(n + 1)]
    # on the first step the recurrence weights U^0 both as the memory endpoint and as
    # the regular level U^{n-1}, so the interior sum starts at m = 0 there
    first = 0 if n == 1 else 1
    F = [laps[k] - _memory(k, laps, G, dt, first) for k in range(n + 1)]

    def residual(V):
        lap_next = _lap(_full(V, f_val, hv[n + 1], dx), dx)
        allL = laps + [lap_next]
        F_next = lap_next - _memory(n + 1, allL, G, dt, first)
        return (V - 2 * cols[n] + cols[n - 1]) / dt**2 - (F_next + 2 * F[n] + F[n - 1]) / 4

    m = grid.nx - 2
    r0 = residual(np.zeros(m))
    A = np.column_stack([residual(np.eye(m)[j]) - r0 for j in range(m)])
    return dense_solve_oracle(A, -r0)


@pytest.mark.parametrize("n", [1, 2, 3, 6])
def test_step_matches_brute_force(n):
    grid = build_grid(1.0, 1.0, 6, 11)
    g = RelaxationKernel.exp_shift(0.7)
    f = TimeFunction.constant(0.4)
    h = TimeFunction.custom(lambda t: 0.3 + np.sin(2.0 * t) * np.ones_like(t))
    rng = np.random.default_rng(n)
    cols = [rng.standard_normal(grid.nx - 2) for _ in range(n + 1)]

    co = visco_coefficients(g, grid)
    mats = assemble_visco_matrices(co, grid.nx)
    hist = HistoryBuffer.empty(grid.nt, grid.nx - 2)
    for k in range(n + 1):
        hist.append(cols[k], mats[3], float(h(grid.t[k])), 0.4)
    got = visco_step(hist, n, co, mats, f, h, grid, g)
    want = _brute_force_next(cols, n, 0.4, h, g, grid)
    assert np.max(np.abs(got - want)) < 1e-11 * max(1.0, np.max(np.abs(want)))


def test_step_with_zero_kernel_is_classical_cn():
    grid = build_grid(1.0, 1.0, 6, 11)
    g = RelaxationKernel.zero()
    rng = np.random.default_rng(0)
    cols = [rng.standard_normal(4) for _ in range(3)]
    co = visco_coefficients(g, grid)
    mats = assemble_visco_matrices(co, grid.nx)
    assert (co.a, co.b, co.c) == (0.0, 0.0, 0.0)
    hist = HistoryBuffer.empty(grid.nt, 4)
    for c in cols:
        hist.append(c, mats[3], 0.0, 0.0)
    got = visco_step(hist, 2, co, mats, TimeFunction.zero(), TimeFunction.zero(), grid, g)
    want = _brute_force_next(cols, 2, 0.0, TimeFunction.zero(), g, grid)
    assert np.allclose(got, want, atol=1e-12)


def test_constants_are_preserved():
    grid = build_grid(2.0, 4.0, 21, 41)
    spec = ProblemSpec("viscoelastic", grid, SpaceFunction.constant(2.0), SpaceFunction.zero(),
                       f=TimeFunction.constant(2.0), g=RelaxationKernel.exp_shift())
    U = visco_solve(spec).values
    assert np.max(np.abs(U - 2.0)) < 1e-12


def test_unconditional_stability_at_r2():
    L = 10 * math.pi
    nx = 101
    dx = L / (nx - 1)
    T = 200.0
    nt = int(round(T / (2 * dx))) + 1
    grid = build_grid(L, (nt - 1) * 2 * dx, nx, nt)
    assert grid.r == pytest.approx(2.0)
    spec = ProblemSpec("viscoelastic", grid, SpaceFunction.cosine(0.2), SpaceFunction.zero(),
                       g=RelaxationKernel.exp_shift())
    fld = visco_solve(spec)
    assert not fld.diverged
    assert np.max(np.abs(fld.values)) < 5.0


def test_history_cap_truncates_memory():
    grid = build_grid(5.0, 10.0, 26, 101)
    base = dict(phi=SpaceFunction.cosine(0.5), psi=SpaceFunction.zero(), g=RelaxationKernel.power(2.0))
    full = visco_solve(ProblemSpec("viscoelastic", grid, **base)).values
    big = visco_solve(ProblemSpec("viscoelastic", grid, history_cap=1000, **base)).values
    small = visco_solve(ProblemSpec("viscoelastic", grid, history_cap=5, **base)).values
    assert np.array_equal(full, big)
    assert not np.array_equal(full, small)
    assert np.max(np.abs(full - small)) < 0.5


def test_memory_softens_the_wave():
    # the effective stiffness 1 - int g lowers the frequency, so the energy decays
    grid = build_grid(10 * math.pi, 100.0, 101, 1001)
    phi = SpaceFunction.mixed_mode(1, 10 * math.pi)
    U = visco_solve(ProblemSpec("viscoelastic", grid, phi, SpaceFunction.zero(),
                                g=RelaxationKernel.exp_shift())).values
    assert np.max(np.abs(U[:, -100:])) < np.max(np.abs(U[:, :100]))


@pytest.mark.parametrize("n", [2, 3, 7])
def test_memory_quadrature_is_averaged_trapezoid(n):
    grid = build_grid(1.0, 1.0, 6, 11)
    g = RelaxationKernel.power(2.0)
    G = kernel_table(g, grid)
    v = np.cos(np.arange(n + 2) * 0.7) + 2.0
    laps = [np.array([x]) for x in v]
    avg = (_memory(n + 1, laps, G, grid.dt) + 2 * _memory(n, laps, G, grid.dt) + _memory(n - 1, laps, G, grid.dt)) / 4
    got = memory_quadrature(n, v, visco_coefficients(g, grid), G)
    assert got == pytest.approx(float(avg[0]), rel=1e-13)


def test_memory_quadrature_needs_samples():
    grid = build_grid(1.0, 1.0, 6, 11)
    g = RelaxationKernel.exp_shift()
    with pytest.raises(ValueError):
        memory_quadrature(3, np.ones(4), visco_coefficients(g, grid), kernel_table(g, grid))
    with pytest.raises(ValueError):
        memory_weights(2, g)
