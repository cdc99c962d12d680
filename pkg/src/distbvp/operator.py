"""The integral operator of the three-point boundary value problem.

Problem::

    -D^2 x = f(t, x) + g(t, x) Du   on [0, 1],
    x(0) = beta Dx(0),   Dx(1) + Dx(eta) = 0.

With F(t) = int_0^t f(s, x(s)) ds and G(t) = int_0^t g(s, x(s)) du(s), a
solution is a fixed point of

    Tx(t) = (t + beta) Dx(0) - int_0^t F - int_0^t G,
    Dx(0) = (F(1) + F(eta) + G(1) + G(eta)) / 2,

and its distributional derivative is Dx(t) = Dx(0) - F(t) - G(t).

Iterates live on a grid that contains 0, 1, eta and every breakpoint of u
(and of the time factor of g). Between nodes an iterate is linear.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable

import numpy as np

from .integrate import (
    GK_KRONROD,
    GK_NODES,
    Integrand,
    adaptive_cells,
    cumulative_integral,
    hk_integrate,
    stieltjes_cumulative,
)
from .regulated import RegulatedFn, SampledFn, total_variation

DEFAULT_GRID = 1025
DEFAULT_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class SourceTerm:
    """f(t, x) = state(t, x) + forcing(t).

    ``state`` must be vectorised in both arguments and continuous in x. The
    x-free ``forcing`` is integrated once per grid and may be singular (HK but
    not Lebesgue integrable), so it is kept apart.
    """

    state: Callable[[np.ndarray, np.ndarray], np.ndarray] | None = None
    forcing: Integrand | None = None
    name: str = "f"

    def state_values(self, t, x) -> np.ndarray:
        t = np.asarray(t, float)
        if self.state is None:
            return np.zeros(np.broadcast(t, np.asarray(x)).shape)
        return np.asarray(self.state(t, np.asarray(x, float)), float) * np.ones(np.broadcast(t, np.asarray(x)).shape)

    def __call__(self, t, x):
        out = self.state_values(t, x)
        if self.forcing is not None:
            out = out + self.forcing(t)
        return out


@dataclass(frozen=True, eq=False)
class CouplingTerm:
    """g(t, x) = time(t) * state(x), with ``time`` regulated (and of bounded variation)."""

    time: RegulatedFn
    state: Callable[[np.ndarray], np.ndarray] | None = None
    name: str = "g"

    def state_values(self, x) -> np.ndarray:
        x = np.asarray(x, float)
        if self.state is None:
            return np.ones_like(x)
        return np.asarray(self.state(x), float) * np.ones_like(x)

    def __call__(self, t, x):
        return self.time(t) * self.state_values(x)

    def sides(self, grid, x_left, x_value, x_right):
        tl, tv, tr = self.time.one_sided(grid)
        return tl * self.state_values(x_left), tv * self.state_values(x_value), tr * self.state_values(x_right)


@dataclass(frozen=True, eq=False)
class BoundData:
    """Majorants: |f(t, x)| <= k(t) ||x|| + h(t) on the ball, var g <= M."""

    k: Integrand
    h: Integrand
    M: float

    def __post_init__(self):
        if not (math.isfinite(self.M) and self.M >= 0.0):
            raise ValueError("M must be a finite non-negative number")


@dataclass(frozen=True, eq=False)
class ProblemSpec:
    f: SourceTerm
    g: CouplingTerm
    u: RegulatedFn
    beta: float
    eta: float
    bounds: BoundData | None = None
    name: str = "problem"

    def __post_init__(self):
        if not math.isfinite(self.beta):
            raise ValueError("beta must be finite")
        if not (0.0 <= self.eta <= 1.0):
            raise ValueError("eta out of [0,1]")
        v = np.linspace(-10.0, 10.0, 41)
        g0 = self.g(np.zeros_like(v), v)
        if np.any(g0 != 0.0):
            raise ValueError("g(0, x) must vanish for every x")

    def g_variation_bound(self, radius: float) -> float:
        """sup over |v| <= radius of var_[0,1] g(., v), for the product form of g."""
        tv = total_variation(self.g.time)
        if tv.unbounded_suspected:
            return math.inf
        v = np.linspace(-radius, radius, 201)
        return tv.total_variation_bound * float(np.max(np.abs(self.g.state_values(v))))


def make_grid(spec: ProblemSpec, n: int = DEFAULT_GRID) -> np.ndarray:
    """Uniform base grid with eta and all breakpoints of u and g forced in."""
    if n < 2:
        raise ValueError("grid needs at least 2 points")
    forced = [spec.eta] + [bp.tau for bp in spec.u.breakpoints] + [bp.tau for bp in spec.g.time.breakpoints]
    return np.union1d(np.linspace(0.0, 1.0, n), forced)


def refine_grid(grid: np.ndarray) -> np.ndarray:
    """Insert every cell midpoint."""
    out = np.empty(2 * grid.size - 1)
    out[0::2] = grid
    out[1::2] = 0.5 * (grid[:-1] + grid[1:])
    return out


@dataclass(frozen=True, eq=False)
class SolutionProfile:
    """x and Dx on a grid, with one-sided values at every node.

    Away from breakpoints the three values coincide. ``dx`` arrays and
    ``dx0`` are NaN for profiles that were never produced by the operator
    (e.g. the initial iterate).
    """

    grid: np.ndarray
    x: np.ndarray
    x_left: np.ndarray
    x_right: np.ndarray
    dx: np.ndarray
    dx_left: np.ndarray
    dx_right: np.ndarray
    dx0: float
    x0: float
    breakpoints: tuple[float, ...] = field(default=())

    @classmethod
    def from_values(cls, grid, x, breakpoints=()) -> "SolutionProfile":
        grid = np.asarray(grid, float)
        x = np.asarray(x, float) * np.ones_like(grid)
        nan = np.full_like(grid, np.nan)
        return cls(grid, x, x.copy(), x.copy(), nan, nan.copy(), nan.copy(), math.nan, float(x[0]), tuple(breakpoints))

    @classmethod
    def zero(cls, spec: ProblemSpec, grid: np.ndarray) -> "SolutionProfile":
        return cls.from_values(grid, 0.0, u_breakpoints(spec))

    def x_fn(self) -> SampledFn:
        return SampledFn(self.grid, self.x, self.x_left, self.x_right)

    def dx_fn(self) -> SampledFn:
        return SampledFn(self.grid, self.dx, self.dx_left, self.dx_right)

    def sup_norm(self) -> float:
        return float(max(np.max(np.abs(self.x)), np.max(np.abs(self.x_left)), np.max(np.abs(self.x_right))))

    def resample(self, grid) -> "SolutionProfile":
        """x carried onto another grid by its piecewise-linear interpolant (Dx dropped)."""
        left, val, right = self.x_fn().one_sided(np.asarray(grid, float))
        nan = np.full_like(val, np.nan)
        return SolutionProfile(np.asarray(grid, float), val, left, right, nan, nan.copy(), nan.copy(),
                               math.nan, float(val[0]), self.breakpoints)

    def combine(self, other: "SolutionProfile", weight: float) -> "SolutionProfile":
        """(1 - weight) * self + weight * other, x only."""
        w = weight
        x = (1.0 - w) * self.x + w * other.x
        xl = (1.0 - w) * self.x_left + w * other.x_left
        xr = (1.0 - w) * self.x_right + w * other.x_right
        nan = np.full_like(x, np.nan)
        return SolutionProfile(self.grid, x, xl, xr, nan, nan.copy(), nan.copy(), math.nan, float(x[0]), self.breakpoints)


def u_breakpoints(spec: ProblemSpec) -> tuple[float, ...]:
    return tuple(bp.tau for bp in spec.u.breakpoints)


class _Discretization:
    """Everything about (spec, grid) that does not depend on the iterate."""

    def __init__(self, spec: ProblemSpec, grid: np.ndarray, tol: float):
        self.spec = spec
        self.grid = grid
        self.h = np.diff(grid)
        self.eta_index = int(np.searchsorted(grid, spec.eta))
        if grid[self.eta_index] != spec.eta or grid[0] != 0.0 or grid[-1] != 1.0:
            raise ValueError("grid must contain 0, eta and 1")
        missing = [bp.tau for bp in (*spec.u.breakpoints, *spec.g.time.breakpoints) if bp.tau not in set(grid)]
        if missing:
            raise ValueError(f"grid is missing breakpoints {missing}")
        self.u_sides = spec.u.one_sided(grid)
        # int of u over each cell: exact when u has a primitive, else trapezoid
        prim = spec.u.primitive(grid)
        if prim is None:
            self.u_cells = 0.5 * self.h * (self.u_sides[2][:-1] + self.u_sides[0][1:])
        else:
            self.u_cells = np.diff(prim)
        self.g_time_sides = spec.g.time.one_sided(grid)
        # per-cell Kronrod nodes: shape (cells, 15); offsets within the cell in [0, h]
        self.offsets = 0.5 * self.h[:, None] * (GK_NODES[None, :] + 1.0)
        self.nodes = grid[:-1, None] + self.offsets
        self.frac = self.offsets / self.h[:, None]
        self._forcing(tol)

    def _forcing(self, tol: float) -> None:
        q = self.spec.f.forcing
        grid = self.grid
        if q is None:
            self.forcing_F = np.zeros_like(grid)
            self.forcing_IF = np.zeros_like(grid)
            self.forcing_end = (0.0, 0.0)
            return
        if q.antiderivative is not None:
            prim = np.asarray(q.antiderivative(grid), float)
            F = prim - prim[0]
            self.forcing_F = F
            base = float(prim[0])
            cells, _ = adaptive_cells(lambda s: np.asarray(q.antiderivative(s), float) - base, grid, tol)
            self.forcing_IF = np.concatenate(([0.0], np.cumsum(cells)))
        else:
            regular = np.ones(grid.size - 1, bool)
            cells = np.zeros(grid.size - 1)
            for s in q.singular:
                for i in np.flatnonzero((grid[:-1] <= s) & (s <= grid[1:])):
                    regular[i] = False
                    cells[i] = hk_integrate(q, grid[i], grid[i + 1]).value
            vals, _ = adaptive_cells(q, grid, tol)
            cells = np.where(regular, vals, cells)
            F = np.concatenate(([0.0], np.cumsum(cells)))
            self.forcing_F = F
            self.forcing_IF = cumulative_integral(grid, F, F)
        self.forcing_end = (hk_integrate(q, 0.0, 1.0).value, hk_integrate(q, 0.0, self.spec.eta).value)


@lru_cache(maxsize=16)
def _discretize(spec: ProblemSpec, grid_bytes: bytes, tol: float) -> _Discretization:
    return _Discretization(spec, np.frombuffer(grid_bytes, dtype=float).copy(), tol)


def discretization(spec: ProblemSpec, grid: np.ndarray, tol: float = DEFAULT_TOL) -> _Discretization:
    return _discretize(spec, np.ascontiguousarray(grid, dtype=float).tobytes(), tol)


@dataclass(frozen=True)
class _Pieces:
    F: np.ndarray
    IF: np.ndarray
    F1: float
    F_eta: float
    G: tuple[np.ndarray, np.ndarray, np.ndarray]
    IG: np.ndarray


def _integrals(spec: ProblemSpec, x: SolutionProfile, tol: float) -> tuple[_Discretization, _Pieces]:
    d = discretization(spec, x.grid, tol)
    f = spec.f
    # state part of F: one Kronrod panel per cell, x linear in the cell
    xs = x.x_right[:-1, None] + (x.x_left[1:] - x.x_right[:-1])[:, None] * d.frac
    fv = f.state_values(d.nodes, xs)
    cells = 0.5 * d.h * (fv @ GK_KRONROD)
    F_state = np.concatenate(([0.0], np.cumsum(cells)))
    slope_l = f.state_values(d.grid, x.x_left)
    slope_r = f.state_values(d.grid, x.x_right)
    IF_state = cumulative_integral(d.grid, F_state, F_state, slope_l, slope_r)

    # dedicated reductions for the two endpoint values of F
    F1 = math.fsum(cells) + d.forcing_end[0]
    F_eta = math.fsum(cells[: d.eta_index]) + d.forcing_end[1]

    g_sides = spec.g.sides(d.grid, x.x_left, x.x, x.x_right)
    G = stieltjes_cumulative(d.grid, g_sides, d.u_sides)
    # inside a cell G(s) = G(t_i+) + gbar (u(s) - u(t_i+)), matching the Stieltjes rule;
    # with a trapezoid for int u this is the plain trapezoid rule for G
    g_bar = 0.5 * (g_sides[2][:-1] + g_sides[0][1:])
    ig_cells = d.h * G[2][:-1] + g_bar * (d.u_cells - d.h * d.u_sides[2][:-1])
    IG = np.concatenate(([0.0], np.cumsum(ig_cells)))
    return d, _Pieces(F_state + d.forcing_F, IF_state + d.forcing_IF, F1, F_eta, G, IG)


def profile_F(spec: ProblemSpec, x: SolutionProfile, tol: float = DEFAULT_TOL) -> SampledFn:
    """F(t, x) = int_0^t f(s, x(s)) ds at the grid nodes (continuous, F(0) = 0)."""
    d, p = _integrals(spec, x, tol)
    return SampledFn(d.grid, p.F)


def profile_G(spec: ProblemSpec, x: SolutionProfile, tol: float = DEFAULT_TOL) -> SampledFn:
    """G_u(t, x) = int_0^t g(s, x(s)) du(s) with one-sided values at the jumps of u."""
    d, p = _integrals(spec, x, tol)
    gl, gv, gr = p.G
    return SampledFn(d.grid, gv, gl, gr)


def _assemble(spec: ProblemSpec, x: SolutionProfile, tol: float) -> SolutionProfile:
    d, p = _integrals(spec, x, tol)
    gl, gv, gr = p.G
    G1 = float(gv[-1])
    G_eta = float(gv[d.eta_index])
    dx0 = 0.5 * math.fsum((p.F1, p.F_eta, G1, G_eta))
    x0 = spec.beta * dx0
    tx = (d.grid + spec.beta) * dx0 - p.IF - p.IG
    return SolutionProfile(
        grid=d.grid,
        x=tx,
        x_left=tx.copy(),
        x_right=tx.copy(),
        dx=dx0 - p.F - gv,
        dx_left=dx0 - p.F - gl,
        dx_right=dx0 - p.F - gr,
        dx0=dx0,
        x0=x0,
        breakpoints=u_breakpoints(spec),
    )


def apply_T(spec: ProblemSpec, x: SolutionProfile, tol: float = DEFAULT_TOL) -> SolutionProfile:
    """Tx on the grid of x, with d(Tx)/dt, d(Tx)(0) and (Tx)(0) = beta d(Tx)(0).

    Tx is continuous; its derivative jumps exactly where G_u does.
    """
    return _assemble(spec, x, tol)


def reconstruct_Dx(spec: ProblemSpec, x: SolutionProfile, tol: float = DEFAULT_TOL) -> SampledFn:
    """Dx(t) = Dx(0) - F(t, x) - G_u(t, x), from integrals only (no differencing)."""
    return _assemble(spec, x, tol).dx_fn()
