"""How the boundary datum steers the damped energy.

Runs the four boundary inputs on one damping profile and prints where each
energy ends up. Decaying input lets the damping win; growing input pumps
energy in; bounded input settles or keeps the energy oscillating.
"""

import math
import sys

from neumann_waves import ProblemSpec, SpaceFunction, TimeFunction, damped_solve, decay_fit, energy_damped, grid_for_ratio

T = float(sys.argv[1]) if len(sys.argv) > 1 else 300.0
grid = grid_for_ratio(10 * math.pi, T, 158, 0.5)
inputs = {
    "exp(-t)": TimeFunction.exp_decay(),
    "sqrt(t)": TimeFunction.sqrt(),
    "5t/(t+1)": TimeFunction.saturating(5.0),
    "sin(t/5)": TimeFunction.sine(0.2),
}

print(f"damping a(x) = exp(-x), T = {T:g}, {grid.nx} nodes, r = {grid.r:.3f}")
for name, h in inputs.items():
    spec = ProblemSpec("damped", grid, SpaceFunction.cosine(0.2), SpaceFunction.zero(), h=h,
                       a=SpaceFunction.exp_decay())
    E = energy_damped(damped_solve(spec))
    tail = E.window(0.75 * T, T).values
    line = f"  h = {name:9s} E(0) = {E.values[0]:9.4f}  E(T) = {E.values[-1]:10.4f}  tail mean {tail.mean():10.4f}"
    if name == "exp(-t)":
        fit = decay_fit(E)
        line += f"  rate {fit.rate:.4g}"
    else:
        line += f"  tail swing {(tail.max() - tail.min()) / 2 / tail.mean():.2f}"
    print(line)
