"""Symmetric kernels on the unit square ("graphons") and their discretizations.

A graphon here is a bounded symmetric measurable function W on [0,1]^2 with
|W| <= 1. Built-in families:

* ``constant(p)``            -- W == p (Erdos-Renyi limit for p in (0,1)),
* ``small_world(p, h)``      -- 1-p inside the circular band
  d_circ(2*pi*x, 2*pi*y) <= 2*pi*h, p outside, with p, h in (0, 1/2),
* ``nearest_neighbor(h)``    -- indicator of the same band (ring lattice limit),
* ``step(values)``           -- piecewise constant on the n x n grid of cells
  I_i = [(i-1)/n, i/n),
* ``custom(fn)``             -- arbitrary user kernel.

Cell averaging projects a kernel onto the step functions at resolution n.  For
the band kernels the per-cell band area is computed in closed form (the band
intersected with a cell is polygonal); custom kernels fall back to a composite
midpoint rule with Richardson extrapolation.

Custom kernels carry documented obligations that are not checked pointwise:
symmetry, |W| <= 1, and L^1-continuity of x -> W(x, .).
"""

from __future__ import annotations

import json
import math

import numpy as np

TWO_PI = 2.0 * math.pi

_BOUND_SLACK = 1e-9


class QuadratureError(RuntimeError):
    """Raised when cell-average quadrature fails to reach the target tolerance."""

    def __init__(self, achieved: float, target: float):
        self.achieved = achieved
        self.target = target
        super().__init__(
            f"cell-average quadrature did not converge: achieved "
            f"{achieved:.3e}, target {target:.3e}"
        )


class StepGraphon:
    """Symmetric piecewise-constant kernel on the n x n cell grid.

    ``values[i, j]`` is the constant value on cell
    ``[i/n, (i+1)/n) x [j/n, (j+1)/n)`` (0-based indices).
    """

    def __init__(self, values):
        values = np.array(values, dtype=float)
        if values.ndim != 2 or values.shape[0] != values.shape[1]:
            raise ValueError("step-graphon values must form a square matrix")
        if values.shape[0] < 1:
            raise ValueError("step-graphon needs at least one cell")
        if not np.array_equal(values, values.T):
            raise ValueError("step-graphon values must be symmetric")
        if np.max(np.abs(values)) > 1.0 + _BOUND_SLACK:
            raise ValueError("step-graphon values must lie in [-1, 1]")
        self.values = np.clip(values, -1.0, 1.0)
        self.values.setflags(write=False)

    @property
    def n(self) -> int:
        return self.values.shape[0]

    def eval(self, x, y):
        """Evaluate the step function; x = 1 is folded into the last cell."""
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        i = np.minimum((x * self.n).astype(int), self.n - 1)
        j = np.minimum((y * self.n).astype(int), self.n - 1)
        return self.values[i, j]

    def __eq__(self, other):
        return isinstance(other, StepGraphon) and np.array_equal(
            self.values, other.values
        )


class Graphon:
    """A bounded symmetric kernel on [0,1]^2, constructed via the classmethods."""

    def __init__(self, kind: str, *, p=None, h=None, step=None, fn=None):
        self.kind = kind
        self.p = p
        self.h = h
        self.step_values = step
        self.fn = fn

    # -- constructors --------------------------------------------------

    @classmethod
    def constant(cls, p: float) -> "Graphon":
        if not -1.0 <= p <= 1.0:
            raise ValueError("constant kernel value must lie in [-1, 1]")
        return cls("constant", p=float(p))

    @classmethod
    def small_world(cls, p: float, h: float) -> "Graphon":
        if not 0.0 < p < 0.5:
            raise ValueError("small-world parameter p must lie in (0, 1/2)")
        if not 0.0 < h < 0.5:
            raise ValueError("small-world band half-width h must lie in (0, 1/2)")
        return cls("small_world", p=float(p), h=float(h))

    @classmethod
    def nearest_neighbor(cls, h: float) -> "Graphon":
        if not 0.0 < h < 0.5:
            raise ValueError("band half-width h must lie in (0, 1/2)")
        return cls("nearest_neighbor", h=float(h))

    @classmethod
    def step(cls, values) -> "Graphon":
        step = values if isinstance(values, StepGraphon) else StepGraphon(values)
        return cls("step", step=step)

    @classmethod
    def custom(cls, fn) -> "Graphon":
        """Wrap a vectorized kernel ``fn(x, y)``.

        The caller guarantees symmetry, |fn| <= 1, and enough smoothness for
        the quadrature fallback; these obligations are not verified pointwise.
        """
        if not callable(fn):
            raise ValueError("custom kernel must be callable")
        return cls("custom", fn=fn)

    # -- evaluation ----------------------------------------------------

    def eval(self, x, y):
        """Evaluate W(x, y) for x, y in [0, 1] (scalars or arrays)."""
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        if self.kind == "constant":
            return np.full(np.broadcast_shapes(x.shape, y.shape), self.p)
        if self.kind in ("small_world", "nearest_neighbor"):
            dist = np.abs(x - y)
            on_band = np.minimum(dist, 1.0 - dist) <= self.h
            if self.kind == "small_world":
                return np.where(on_band, 1.0 - self.p, self.p)
            return np.where(on_band, 1.0, 0.0)
        if self.kind == "step":
            return self.step_values.eval(x, y)
        return np.asarray(self.fn(x, y), dtype=float)

    # -- cell averaging ------------------------------------------------

    def cell_average(self, n: int, tol: float = 1e-9) -> StepGraphon:
        """Project onto the step functions at resolution n.

        Entry (i, j) is n^2 times the integral of W over the cell
        I_i x I_j.  Closed forms are used for the built-in kinds; custom
        kernels use midpoint quadrature refined until the Richardson
        extrapolants agree to ``tol``.
        """
        if n < 1:
            raise ValueError("resolution n must be >= 1")
        if self.kind == "constant":
            return StepGraphon(np.full((n, n), self.p))
        if self.kind == "small_world":
            frac = _band_fraction_matrix(n, self.h)
            return StepGraphon(self.p + (1.0 - 2.0 * self.p) * frac)
        if self.kind == "nearest_neighbor":
            return StepGraphon(_band_fraction_matrix(n, self.h))
        if self.kind == "step":
            return StepGraphon(_step_cell_average(self.step_values.values, n))
        return StepGraphon(_custom_cell_average(self.fn, n, tol))

    # -- (de)serialization ----------------------------------------------

    def to_json(self) -> str:
        if self.kind == "custom":
            raise ValueError("custom kernels are not JSON-serializable")
        return json.dumps(self.to_dict())

    def to_dict(self) -> dict:
        if self.kind == "constant":
            return {"kind": "constant", "p": self.p}
        if self.kind == "small_world":
            return {"kind": "small_world", "p": self.p, "h": self.h}
        if self.kind == "nearest_neighbor":
            return {"kind": "nearest_neighbor", "h": self.h}
        if self.kind == "step":
            return {"kind": "step", "values": self.step_values.values.tolist()}
        raise ValueError("custom kernels are not JSON-serializable")

    @classmethod
    def from_dict(cls, spec: dict) -> "Graphon":
        kind = spec.get("kind")
        if kind == "constant":
            return cls.constant(spec["p"])
        if kind == "small_world":
            return cls.small_world(spec["p"], spec["h"])
        if kind == "nearest_neighbor":
            return cls.nearest_neighbor(spec["h"])
        if kind == "step":
            return cls.step(spec["values"])
        raise ValueError(f"unknown graphon kind: {kind!r}")

    @classmethod
    def from_json(cls, text: str) -> "Graphon":
        return cls.from_dict(json.loads(text))


def midpoint_step(W: Graphon, n: int) -> StepGraphon:
    """Alternative discretization: sample W at the grid points (i/n, j/n).

    This is interchangeable with :meth:`Graphon.cell_average` whenever both
    converge to W in L^2; cell averaging remains the default everywhere else
    in the package.
    """
    x = np.arange(1, n + 1) / n
    values = W.eval(x[:, None], x[None, :])
    values = 0.5 * (values + values.T)
    return StepGraphon(values)


def step_norm_2n(a: StepGraphon, b: StepGraphon) -> float:
    """Scaled Frobenius distance sqrt(n^-2 sum (a_ij - b_ij)^2)."""
    if a.n != b.n:
        raise ValueError(f"resolution mismatch: {a.n} != {b.n}")
    diff = a.values - b.values
    return float(np.sqrt(np.mean(diff**2)))


def kernel_distance(W: Graphon, U: Graphon, norm: str = "L2", resolution: int = 256) -> float:
    """L1 or L2 distance between two kernels over the unit square.

    Both kernels are projected onto a common refinement grid and the distance
    of the projections is returned.  The requested ``resolution`` is rounded
    up to a multiple of every step-kernel resolution among the arguments, so
    the result is exact when both kernels are step functions; otherwise it is
    a quadrature estimate with O(1/resolution) error.
    """
    if resolution < 1:
        raise ValueError("resolution must be >= 1")
    if norm not in ("L1", "L2"):
        raise ValueError("norm must be 'L1' or 'L2'")
    base = 1
    for kernel in (W, U):
        if kernel.kind == "step":
            base = math.lcm(base, kernel.step_values.n)
    r = -(-resolution // base) * base
    diff = W.cell_average(r).values - U.cell_average(r).values
    if norm == "L1":
        return float(np.mean(np.abs(diff)))
    return float(np.sqrt(np.mean(diff**2)))


# -- internals ----------------------------------------------------------


def _area_below(ax, bx, ay, by, c):
    """Area of {(x, y) in [ax,bx] x [ay,by] : x - y <= c} (vectorized in ax/bx)."""
    height = by - ay
    x1 = np.minimum(bx, np.maximum(ax, ay + c))
    full = (x1 - ax) * height
    xr = np.minimum(bx, np.maximum(x1, by + c))
    sloped = (by + c) * (xr - x1) - 0.5 * (xr**2 - x1**2)
    return full + sloped


def _band_fraction_matrix(n: int, h: float) -> np.ndarray:
    """Fraction of each cell covered by the circular band min(|x-y|, 1-|x-y|) <= h.

    The fraction depends on cells only through the diagonal offset d = i - j,
    so only 2n-1 exact areas are computed.
    """
    d = np.arange(-(n - 1), n)
    ax = d / n
    bx = (d + 1) / n
    ay, by = 0.0, 1.0 / n

    def strip(lo, hi):
        return _area_below(ax, bx, ay, by, hi) - _area_below(ax, bx, ay, by, lo)

    area = strip(-h, h) + strip(1.0 - h, 2.0) + strip(-2.0, -(1.0 - h))
    frac = area * n * n
    idx = np.arange(n)
    matrix = frac[idx[:, None] - idx[None, :] + n - 1]
    return 0.5 * (matrix + matrix.T)


def _step_cell_average(values: np.ndarray, n: int) -> np.ndarray:
    """Exact cell average of a step kernel via 1-D interval overlaps."""
    q = values.shape[0]
    i = np.arange(n)
    k = np.arange(q)
    lo = np.maximum(i[:, None] / n, k[None, :] / q)
    hi = np.minimum((i[:, None] + 1) / n, (k[None, :] + 1) / q)
    overlap = np.maximum(0.0, hi - lo)  # (n, q)
    averaged = n * n * (overlap @ values @ overlap.T)
    return 0.5 * (averaged + averaged.T)


def _custom_cell_average(fn, n: int, tol: float, max_points: int = 4096) -> np.ndarray:
    """Composite midpoint quadrature with Richardson extrapolation per cell."""
    prev_est = None
    prev_rich = None
    achieved = math.inf
    s = 1
    while n * s <= max_points:
        g = n * s
        mid = (np.arange(g) + 0.5) / g
        vals = np.asarray(fn(mid[:, None], mid[None, :]), dtype=float)
        est = vals.reshape(n, s, n, s).mean(axis=(1, 3))
        if prev_est is not None:
            rich = (4.0 * est - prev_est) / 3.0
            if prev_rich is not None:
                achieved = float(np.max(np.abs(rich - prev_rich)))
                if achieved < tol:
                    return 0.5 * (rich + rich.T)
            prev_rich = rich
        prev_est = est
        s *= 2
    raise QuadratureError(achieved=achieved, target=tol)
