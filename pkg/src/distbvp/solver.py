"""Hypothesis checks, the a priori radius, and fixed-point iteration.

The existence theorem is non-constructive; the solver runs damped Picard
iteration from x = 0 and reports honestly when it does not converge.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .integrate import Integrand, IntegrationError, adaptive_cells, hk_integrate
from .operator import (
    DEFAULT_GRID,
    ProblemSpec,
    SolutionProfile,
    apply_T,
    make_grid,
    refine_grid,
)
from .regulated import DEFAULT_SUP_GRID, dyadic_grid, norm_bounds, total_variation

DAMPING_FLOOR = 0.125
JUMP_THRESHOLD = 1e-12


class HypothesisError(RuntimeError):
    """Raised by :func:`solve` when the smallness condition fails (unless forced)."""


@dataclass(frozen=True)
class HypothesisReport:
    norm_K: float
    norm_H: float
    norm_u: float
    M: float
    smallness: float
    condition_ok: bool
    radius: float | None
    radius_bracket: tuple[float, float] | None = None
    beta: float = math.nan
    norm_u_estimate: float | None = None
    checks: dict = field(default_factory=dict)

    def recompute_radius(self, norm_u: float | None = None) -> float | None:
        """Radius from the stored fields; bit-identical to ``radius`` by construction."""
        norm_u = self.norm_u if norm_u is None else norm_u
        return _radius(self.smallness, self.norm_H, self.M, norm_u, abs(self.beta) + 2.0)

    def to_dict(self) -> dict:
        return {
            "beta": self.beta,
            "norm_K": self.norm_K,
            "norm_H": self.norm_H,
            "norm_u": self.norm_u,
            "norm_u_estimate": self.norm_u_estimate,
            "M": self.M,
            "smallness": self.smallness,
            "condition_ok": self.condition_ok,
            "radius": self.radius,
            "radius_bracket": list(self.radius_bracket) if self.radius_bracket else None,
            "checks": self.checks,
        }


def _radius(smallness: float, norm_H: float, M: float, norm_u: float, beta_factor: float) -> float | None:
    if not smallness < 1.0:
        return None
    return beta_factor * (norm_H + 2.0 * M * norm_u) / (1.0 - smallness)


def primitive_profile(q: Integrand, grid: np.ndarray, tol: float) -> np.ndarray:
    """t -> int_0^t q on ``grid`` (starting at 0)."""
    if q.antiderivative is not None:
        prim = np.asarray(q.antiderivative(grid), float)
        return prim - prim[0]
    cells, _ = adaptive_cells(q, grid, tol)
    for s in q.singular:
        for i in np.flatnonzero((grid[:-1] <= s) & (s <= grid[1:])):
            cells[i] = hk_integrate(q, grid[i], grid[i + 1]).value
    return np.concatenate(([0.0], np.cumsum(cells)))


def _sup_primitive(q: Integrand, tol: float, density: int) -> float:
    # fails loudly when q is not integrable
    hk_integrate(q, 0.0, 1.0)
    grid = dyadic_grid(density)
    return float(np.max(np.abs(primitive_profile(q, grid, tol))))


def _h3_check(spec: ProblemSpec, radius: float) -> dict:
    """Pointwise sample of -k|v| - h <= f(t, v) <= k|v| + h for constant x = v."""
    k, h = spec.bounds.k, spec.bounds.h
    t = (np.arange(512) + 0.5) / 512
    v = np.linspace(-radius, radius, 41)
    T, V = np.meshgrid(t, v)
    fv = spec.f(T, V)
    kv, hv = k(T), h(T)
    bound = kv * np.abs(V) + hv
    viol = np.abs(fv) - bound
    worst = float(np.max(viol))
    negative = int(np.count_nonzero((k(t) < 0) | (h(t) < 0)))
    ok = worst <= 1e-12 * max(1.0, float(np.max(np.abs(bound)))) and negative == 0
    detail = f"max(|f| - (k|v| + h)) = {worst:.6g} on 512 x 41 samples; {negative} samples with k or h negative"
    return {"ok": bool(ok), "detail": detail}


def check_hypotheses(spec: ProblemSpec, tol: float = 1e-9, grid_density: int = DEFAULT_SUP_GRID) -> HypothesisReport:
    """Norms of K and H, the smallness quantity and the radius of the invariant ball."""
    if spec.bounds is None:
        raise ValueError("problem has no bound data (k, h, M)")
    b = spec.bounds
    try:
        norm_K = _sup_primitive(b.k, tol, grid_density)
        norm_H = _sup_primitive(b.h, tol, grid_density)
    except IntegrationError as exc:
        raise IntegrationError(f"bound data not integrable: {exc}") from exc
    lower, upper = norm_bounds(spec.u, grid_density)
    norm_u = upper if upper is not None else lower
    factor = abs(spec.beta) + 2.0
    smallness = factor * norm_K
    ok = smallness < 1.0
    radius = _radius(smallness, norm_H, b.M, norm_u, factor)
    bracket = None
    if ok and upper is not None and lower != upper:
        bracket = (_radius(smallness, norm_H, b.M, lower, factor), radius)

    checks: dict = {}
    probe = radius if radius is not None else 1.0
    checks["H3"] = _h3_check(spec, max(probe, 1e-12))
    g0 = spec.g(np.zeros(5), np.linspace(-probe, probe, 5))
    tv = total_variation(spec.g.time)
    checks["H4"] = {
        "ok": bool(np.all(g0 == 0.0)) and not tv.unbounded_suspected,
        "detail": f"g(0, v) = 0 on samples; var of time factor: {tv.total_variation_bound:.6g} ({tv.status})",
    }
    var_g = spec.g_variation_bound(probe)
    checks["H6"] = {"ok": bool(var_g <= b.M), "detail": f"sup_v var g(., v) = {var_g:.6g} vs M = {b.M:.6g}"}
    if upper is None:
        checks["norm_u"] = {"ok": True, "detail": "norm of u is a grid estimate (lower bound)"}
    return HypothesisReport(
        norm_K=norm_K,
        norm_H=norm_H,
        norm_u=norm_u,
        M=b.M,
        smallness=smallness,
        condition_ok=ok,
        radius=radius,
        radius_bracket=bracket,
        beta=spec.beta,
        norm_u_estimate=lower,
        checks=checks,
    )


@dataclass(frozen=True)
class SolveOptions:
    grid: int = DEFAULT_GRID
    tol: float = 1e-8
    max_iter: int = 200
    damping: float = 1.0
    quad_tol: float = 1e-9

    def __post_init__(self):
        if not (0.0 < self.damping <= 1.0):
            raise ValueError("damping must lie in (0, 1]")
        if self.grid < 2 or self.max_iter < 1 or not self.tol > 0:
            raise ValueError("invalid solve options")


@dataclass(frozen=True)
class SolveResult:
    solution: SolutionProfile
    converged: bool
    iterations: int
    residual: float
    bc_residuals: tuple[float, float]
    norm_x: float
    within_ball: bool | None
    residual_history: tuple[float, ...]
    damping: float
    report: HypothesisReport | None = None


def profile_residual(x: SolutionProfile, tx: SolutionProfile) -> float:
    """Sup over nodes and one-sided values of |x - Tx|."""
    return float(max(np.max(np.abs(x.x - tx.x)), np.max(np.abs(x.x_left - tx.x_left)),
                     np.max(np.abs(x.x_right - tx.x_right))))


def bc_residuals(spec: ProblemSpec, sol: SolutionProfile) -> tuple[float, float]:
    i_eta = int(np.searchsorted(sol.grid, spec.eta))
    return (abs(sol.x[0] - spec.beta * sol.dx[0]), abs(sol.dx[-1] + sol.dx[i_eta]))


def _with_derivative(x: SolutionProfile, tx: SolutionProfile) -> SolutionProfile:
    """x with the derivative that the operator reconstructs from it."""
    return SolutionProfile(x.grid, x.x, x.x_left, x.x_right, tx.dx, tx.dx_left, tx.dx_right, tx.dx0,
                           float(x.x[0]), x.breakpoints)


def solve(spec: ProblemSpec, options: SolveOptions | None = None, force: bool = False) -> SolveResult:
    """Damped Picard iteration x <- (1 - d) x + d Tx from x = 0.

    The damping halves (down to 1/8) whenever the residual grows, restarting
    from the best iterate so far. Without convergence the best iterate is
    returned with ``converged=False``.
    """
    opts = options or SolveOptions()
    report = check_hypotheses(spec, opts.quad_tol) if spec.bounds is not None else None
    if report is not None and not report.condition_ok and not force:
        raise HypothesisError(f"smallness condition fails: (|beta|+2)||K|| = {report.smallness:.6g} >= 1")

    grid = make_grid(spec, opts.grid)
    x = SolutionProfile.zero(spec, grid)
    damping = opts.damping
    history: list[float] = []
    best: tuple[float, SolutionProfile, SolutionProfile] | None = None
    converged = False
    for _ in range(opts.max_iter):
        tx = apply_T(spec, x, opts.quad_tol)
        res = profile_residual(x, tx)
        history.append(res)
        if best is None or res < best[0]:
            best = (res, x, tx)
        if res < opts.tol:
            converged = True
            break
        if len(history) > 1 and res > history[-2] and damping > DAMPING_FLOOR:
            damping = max(0.5 * damping, DAMPING_FLOOR)
            x, tx = best[1], best[2]
        x = tx if damping == 1.0 else x.combine(tx, damping)

    res, x, tx = (history[-1], x, tx) if converged else best
    sol = _with_derivative(x, tx)
    norm_x = sol.sup_norm()
    within = None
    if report is not None and report.radius is not None:
        within = bool(norm_x <= report.radius + opts.tol)
    return SolveResult(
        solution=sol,
        converged=converged,
        iterations=len(history),
        residual=res,
        bc_residuals=bc_residuals(spec, sol),
        norm_x=norm_x,
        within_ball=within,
        residual_history=tuple(history),
        damping=damping,
        report=report,
    )


@dataclass(frozen=True)
class VerificationReport:
    residual: float
    bc_residuals: tuple[float, float]
    dx_jump_points: tuple[float, ...]
    u_breakpoints: tuple[float, ...]
    jumps_match: bool
    ok: bool


def jump_points(profile: SolutionProfile, threshold: float = JUMP_THRESHOLD) -> tuple[float, ...]:
    jump = np.abs(profile.dx_right - profile.dx_left)
    scale = 1.0 + np.max(np.abs(profile.dx))
    inner = np.zeros(profile.grid.size, bool)
    inner[1:-1] = jump[1:-1] > threshold * scale
    return tuple(float(t) for t in profile.grid[inner])


def verify(spec: ProblemSpec, sol: SolutionProfile, tol: float = 1e-8) -> VerificationReport:
    """Re-apply the operator on the doubled grid and compare at the solution's nodes.

    Reports, never raises: residual, boundary residuals of the reconstructed
    derivative, and whether Dx jumps only at breakpoints of u.
    """
    fine = refine_grid(sol.grid)
    x_fine = sol.resample(fine)
    t_fine = apply_T(spec, x_fine)
    coarse = slice(None, None, 2)
    res = float(max(np.max(np.abs(sol.x - t_fine.x[coarse])),
                    np.max(np.abs(sol.x_left - t_fine.x_left[coarse])),
                    np.max(np.abs(sol.x_right - t_fine.x_right[coarse]))))
    checked = _with_derivative(x_fine, t_fine)
    bc = bc_residuals(spec, checked)
    jumps = jump_points(checked)
    u_bps = tuple(bp.tau for bp in spec.u.breakpoints)
    match = set(jumps) <= set(u_bps)
    return VerificationReport(
        residual=res,
        bc_residuals=bc,
        dx_jump_points=jumps,
        u_breakpoints=u_bps,
        jumps_match=bool(match),
        ok=bool(res <= tol and max(bc) <= tol and match),
    )
