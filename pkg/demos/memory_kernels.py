"""The three relaxation kernels side by side.

Prints the kernel integral (which softens the medium), the checks on
xi = -g'/g, and the modified-energy decay rate under a decaying boundary input.
"""

import math

from neumann_waves import (
    ProblemSpec,
    RelaxationKernel,
    SpaceFunction,
    TimeFunction,
    check_A1,
    check_A2,
    decay_fit,
    energy_modified,
    grid_for_ratio,
    visco_solve,
)

T = 300.0
grid = grid_for_ratio(10 * math.pi, T, 158, 0.5)
kernels = {
    "exp(-(t+1))": RelaxationKernel.exp_shift(),
    "(t+1)^-10": RelaxationKernel.power(10.0),
    "0.2/(ln^2(t+2)(t+1))": RelaxationKernel.log_type(),
}
for name, g in kernels.items():
    a1 = check_A1(g)
    a2 = check_A2(g, grid)
    stiffness = 1.0 - a1.integral_estimate
    spec = ProblemSpec("viscoelastic", grid, SpaceFunction.sine(0.2), SpaceFunction.cosine(0.2),
                       h=TimeFunction.exp_decay(), g=g)
    E = energy_modified(visco_solve(spec), g, stride=10)
    fit = decay_fit(E)
    print(f"{name:22s} int g = {a1.integral_estimate:.4f}  long-time stiffness {stiffness:.3f}  "
          f"xi monotone {a2.a2_monotone}  rate {fit.rate:.4g} (r2 {fit.r_squared:.2f})")
