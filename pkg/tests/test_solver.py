import math

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, strategies as st

from conftest import constant_fixed_point, constant_probe, example41, example42, zero_problem
from distbvp import catalog
from distbvp.integrate import Integrand, IntegrationError
from distbvp.operator import (
    BoundData,
    CouplingTerm,
    ProblemSpec,
    SolutionProfile,
    SourceTerm,
    apply_T,
    make_grid,
)
from distbvp.regulated import constant
from distbvp.solver import (
    HypothesisError,
    SolveOptions,
    check_hypotheses,
    solve,
    verify,
)

with mp.workdps(40):
    SMALLNESS_41 = float(4 * (mp.sqrt(6) - mp.sqrt(5)))
    RADIUS_41 = float(18 / (1 - 4 * (mp.sqrt(6) - mp.sqrt(5))))
    BRACKET_42 = (float(mp.mpf(13) / 6 * (mp.sin(1) + 1)), float(mp.mpf(13) / 6 * (mp.sin(1) + 3)))


@pytest.fixture(scope="module")
def solved41():
    spec = example41()
    return spec, solve(spec)


@pytest.fixture(scope="module")
def solved42():
    spec = example42()
    return spec, solve(spec)


def test_report_example41():
    rep = check_hypotheses(example41())
    assert rep.condition_ok
    assert rep.smallness == pytest.approx(SMALLNESS_41, abs=1e-14)
    assert rep.radius == pytest.approx(RADIUS_41, abs=1e-10)
    assert (rep.norm_H, rep.norm_u, rep.M) == (1.0, 1.0, 1.0)
    assert rep.radius_bracket is None
    assert rep.checks["H3"]["ok"] and rep.checks["H6"]["ok"]


def test_report_example42():
    rep = check_hypotheses(example42())
    assert rep.condition_ok and rep.smallness == 0.0
    assert rep.norm_H == pytest.approx(1 + math.sin(1), abs=1e-15)
    lo, hi = rep.radius_bracket
    assert BRACKET_42[0] <= lo <= hi <= BRACKET_42[1] + 1e-12
    assert hi == rep.radius
    # the printed h can be negative, so the pointwise majorant check is reported as failing
    assert not rep.checks["H3"]["ok"]


def test_report_zero_data():
    rep = check_hypotheses(zero_problem())
    assert rep.condition_ok and rep.radius == 0.0
    res = solve(zero_problem())
    assert res.converged and res.norm_x == 0.0 and res.within_ball


def test_report_rejects_non_integrable_bound():
    spec = ProblemSpec(SourceTerm(), CouplingTerm(constant(0.0)), constant(0.0), 0.0, 0.5,
                       BoundData(Integrand(lambda t: 1.0 / t, singular=(0.0,)), catalog.integrand("zero"), 0.0))
    with pytest.raises(IntegrationError):
        check_hypotheses(spec)


def test_report_requires_bounds():
    with pytest.raises(ValueError):
        check_hypotheses(constant_probe(1.0, 0.0, 0.5))


def test_report_to_dict_round_trip():
    rep = check_hypotheses(example42())
    d = rep.to_dict()
    assert d["radius"] == rep.radius and d["radius_bracket"] == list(rep.radius_bracket)
    assert d["beta"] == -1 / 6


@given(st.floats(-5, 5), st.floats(0, 0.3), st.floats(0, 3), st.floats(0, 4))
def test_radius_recomputes_bit_exactly(beta, k, h, M):
    spec = ProblemSpec(SourceTerm(), CouplingTerm(constant(0.0)), constant(0.0), beta, 0.5,
                       BoundData(catalog.integrand(f"const({k})"), catalog.integrand(f"const({h})"), M))
    rep = check_hypotheses(spec, grid_density=64)
    assert rep.recompute_radius() == rep.radius
    if rep.condition_ok:
        assert rep.radius >= 0.0
    else:
        assert rep.radius is None


def test_solve_zero():
    res = solve(zero_problem())
    assert res.iterations == 1 and res.residual == 0.0
    assert np.all(res.solution.x == 0.0) and res.bc_residuals == (0.0, 0.0)


@pytest.mark.parametrize("c, beta, eta", [(1.0, 4.0, 0.25), (-2.5, -1 / 6, 2 / 3)])
def test_solve_constant_forcing(c, beta, eta):
    res = solve(constant_probe(c, beta, eta))
    assert res.converged and res.iterations == 2 and res.residual < 1e-12
    assert res.solution.x == pytest.approx(constant_fixed_point(res.solution.grid, c, beta, eta), abs=1e-12)


def test_solve_example41(solved41):
    spec, res = solved41
    assert res.converged
    assert res.residual < 1e-6 and max(res.bc_residuals) < 1e-6
    assert res.norm_x <= 123.03 and res.within_ball


def test_solve_example42(solved42):
    _, res = solved42
    assert res.converged and res.residual < 1e-8 and max(res.bc_residuals) < 1e-8
    assert res.norm_x <= BRACKET_42[1] and res.within_ball


def test_solve_refuses_failed_condition():
    spec = ProblemSpec(catalog.source("sin_x"), CouplingTerm(constant(0.0)), constant(0.0), 4.0, 0.25,
                       BoundData(catalog.integrand("const(1)"), catalog.integrand("const(1)"), 0.0))
    with pytest.raises(HypothesisError):
        solve(spec)
    res = solve(spec, force=True)
    assert res.report is not None and not res.report.condition_ok and res.within_ball is None


def test_no_convergence_is_reported():
    spec = ProblemSpec(SourceTerm(state=lambda t, x: 40.0 * x + 1.0), CouplingTerm(constant(0.0)),
                       constant(0.0), 3.0, 0.5)
    res = solve(spec, SolveOptions(max_iter=15))
    assert not res.converged and res.iterations == 15
    assert len(res.residual_history) == 15
    assert res.residual == min(res.residual_history)
    assert res.damping == 0.125


def test_damping_recovers_mildly_expansive_map():
    # x -> 1 - 1.5 * (operator) oscillates without damping
    spec = ProblemSpec(SourceTerm(state=lambda t, x: -6.0 * x + 1.0), CouplingTerm(constant(0.0)),
                       constant(0.0), 1.0, 0.5)
    plain = solve(spec, SolveOptions(max_iter=200, damping=1.0))
    assert plain.converged and plain.damping < 1.0


def test_solve_options_validation():
    for bad in ({"damping": 0.0}, {"damping": 1.5}, {"grid": 1}, {"max_iter": 0}, {"tol": 0.0}):
        with pytest.raises(ValueError):
            SolveOptions(**bad)


def test_verify_examples():
    c, beta, eta = 1.0, 4.0, 0.25
    spec = constant_probe(c, beta, eta)
    res = solve(spec)
    rep = verify(spec, res.solution)
    assert rep.ok and rep.residual < 1e-10

    zero = SolutionProfile.from_values(make_grid(spec, 1025), 0.0)
    rep0 = verify(spec, zero)
    t = np.linspace(0, 1, 100_001)
    expected = np.max(np.abs(constant_fixed_point(t, c, beta, eta)))
    assert rep0.residual == pytest.approx(expected, abs=1e-12) and not rep0.ok

    zspec = zero_problem()
    zrep = verify(zspec, solve(zspec).solution)
    assert zrep.residual == 0.0 and zrep.bc_residuals == (0.0, 0.0) and zrep.ok


def test_verify_after_solve(solved41, solved42):
    for spec, res in (solved41, solved42):
        rep = verify(spec, res.solution, 1e-8)
        assert res.converged and rep.ok, (spec.name, rep)
    spec, res = solved41
    assert verify(spec, res.solution).dx_jump_points == (0.5,)


def test_grid_doubling_invariance(solved41, solved42):
    tol = 1e-8
    for spec, res in (solved41, solved42):
        fine = solve(spec, SolveOptions(grid=2049, tol=tol))
        common = np.interp(res.solution.grid, fine.solution.grid, fine.solution.x)
        assert np.max(np.abs(res.solution.x - common)) < 10 * tol
    # a smooth maximum is also stable in norm
    spec, res = solved41
    fine = solve(spec, SolveOptions(grid=2049, tol=tol))
    assert abs(fine.norm_x - res.norm_x) < 10 * tol


# ---- properties ----

def weighted_linear(lam):
    return SourceTerm(state=lambda t, x: lam * x / (3.0 * np.sqrt(5.0 + t)) + 1.0, name=f"{lam}*x*w")


@given(st.floats(0.01, 0.3), st.floats(-1, 1), st.floats(0, 1))
def test_contractive_family_residuals_decrease(lam, beta, eta):
    spec = ProblemSpec(weighted_linear(lam), CouplingTerm(constant(0.0)), constant(0.0), beta, eta)
    res = solve(spec, SolveOptions(grid=129, tol=1e-13, max_iter=60))
    hist = [r for r in res.residual_history if r > 1e-13]
    assert len(hist) >= 2
    assert all(b / a < 1 for a, b in zip(hist, hist[1:]))
    assert res.damping == 1.0


_EX41 = example41()
_R41 = check_hypotheses(_EX41).radius
_GRID41 = make_grid(_EX41, 1025)


@given(st.lists(st.floats(-1, 1), min_size=1, max_size=5), st.floats(0, 1), st.integers(1, 40))
def test_ball_stability(coef, scale, freq):
    raw = sum(c * np.cos((k + 1) * freq * _GRID41 + k) for k, c in enumerate(coef))
    peak = np.max(np.abs(raw))
    x = raw * (scale * _R41 / peak) if peak > 0 else raw
    tx = apply_T(_EX41, SolutionProfile.from_values(_GRID41, x))
    assert tx.sup_norm() <= _R41 + 1e-6
