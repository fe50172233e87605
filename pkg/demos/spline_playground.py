"""Tour of the spline building blocks: grids, evaluation, refits.

Run: python demos/spline_playground.py
"""

import numpy as np

from adaptkan import (
    GridDomain,
    activation_dw,
    activation_dz,
    eval_activation,
    greville_abscissae,
    refine_grid,
    refit_greville,
    refit_least_squares,
)

rng = np.random.default_rng(0)

# A grid domain is an interval split into uniform sub-intervals; a spline
# activation on it carries omega + k weights.
dom = GridDomain(-1.0, 1.0, omega=5, k=3)
print(f"domain [{dom.a}, {dom.b}] with {dom.omega} intervals of width {dom.d}")
print(f"weights per activation: {dom.n_coef}")

# Equal weights give a constant function (the basis sums to one everywhere).
w_const = np.full(dom.n_coef, 2.5)
z = np.linspace(-1.2, 1.2, 7)
print("\nconstant weights 2.5 evaluated on", z)
print(" ->", eval_activation(z, w_const, dom))

# Weights sampled from a line at the Greville points reproduce that line.
g = greville_abscissae(dom)
print("\nGreville abscissae:", g)
w_line = 3.0 * g - 0.5
print("line 3z - 0.5 at z=0.37:", eval_activation(0.37, w_line, dom))
print("derivative there:", activation_dz(0.37, w_line, dom))

# The weight gradient is the local basis window: nonnegative, sums to 1.
basis = activation_dw(0.37, dom)
print("\nbasis window at 0.37:", np.round(basis, 4), "sum:", basis.sum())

# Refitting moves a spline to a new domain. The exact route solves a dense
# least-squares problem; the Greville route just re-interpolates weights.
# Note the stretch keeps the interval count, so resolution drops and random
# wiggly splines cannot be carried over exactly (lines and constants can).
w_rand = rng.standard_normal(dom.n_coef)
wide = GridDomain(-2.0, 2.0, omega=5, k=3)
w_exact, info = refit_least_squares(w_rand, dom, wide)
w_fast = refit_greville(w_rand, dom, wide)
probe = np.linspace(-0.9, 0.9, 5)
print("\nrefit to [-2, 2]:")
print("  original   ", np.round(eval_activation(probe, w_rand, dom), 4))
print("  exact refit", np.round(eval_activation(probe, w_exact, wide), 4))
print("  fast refit ", np.round(eval_activation(probe, w_fast, wide), 4))
print("  exact-refit max residual on fit grid:", f"{info.max_err:.2e}")

# Refinement keeps the domain but adds resolution.
w_fine, dom_fine, info = refine_grid(w_rand, dom, 40)
err = np.abs(eval_activation(probe, w_fine, dom_fine)
             - eval_activation(probe, w_rand, dom)).max()
print(f"\nrefined 5 -> 40 intervals; function change at probes: {err:.2e}")
