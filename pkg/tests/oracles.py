"""Independent oracles used to derive expected values in the tests.

These deliberately avoid the code paths they check: cell averages come from
brute-force midpoint sums, transport distances from an explicit linear
program over transport plans, and the two-oscillator dynamics from its
closed-form solution.
"""

import numpy as np
from scipy.optimize import linprog

from kmflow.measures import CircleMeasure, circle_distance

TWO_PI = 2.0 * np.pi


def midpoint_cell_average(kernel_eval, n, i, j, points=512):
    """Brute-force midpoint-rule average of a kernel over cell (i, j)."""
    offsets = (np.arange(points) + 0.5) / (points * n)
    xs = i / n + offsets
    ys = j / n + offsets
    return float(np.mean(kernel_eval(xs[:, None], ys[None, :])))


def lp_transport_distance(mu: CircleMeasure, eta: CircleMeasure) -> float:
    """Exact optimal transport cost with arc-length ground cost, via LP."""
    m1, m2 = mu.n_atoms, eta.n_atoms
    cost = circle_distance(mu.positions[:, None], eta.positions[None, :]).ravel()
    A = np.zeros((m1 + m2, m1 * m2))
    for i in range(m1):
        A[i, i * m2:(i + 1) * m2] = 1.0
    for j in range(m2):
        A[m1 + j, j::m2] = 1.0
    b = np.concatenate([mu.masses, eta.masses])
    # one marginal constraint is redundant; drop it to keep the LP full rank
    result = linprog(cost, A_eq=A[:-1], b_eq=b[:-1], bounds=(0, None),
                     method="highs")
    assert result.success, result.message
    return float(result.fun)


def random_circle_measure(rng, max_atoms=8) -> CircleMeasure:
    k = int(rng.integers(1, max_atoms + 1))
    positions = rng.uniform(0.0, TWO_PI, k)
    if k == 1:
        masses = np.array([1.0])
    else:
        cuts = np.sort(rng.random(k - 1))
        masses = np.diff(np.concatenate([[0.0], cuts, [1.0]]))
        masses = np.maximum(masses, 1e-9)
        masses = masses / masses.sum()
    return CircleMeasure(positions, masses)


def two_oscillator_gap(phi0: float, K: float, t: float) -> float:
    """Closed-form phase gap: tan(phi/2) = tan(phi0/2) * exp(-K t)."""
    return 2.0 * np.arctan(np.tan(0.5 * phi0) * np.exp(-K * t))
