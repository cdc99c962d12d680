from __future__ import annotations

from pathlib import Path

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from distbvp import catalog
from distbvp.operator import BoundData, CouplingTerm, ProblemSpec, SourceTerm
from distbvp.regulated import constant

ROOT = Path(__file__).resolve().parents[1]
PROBLEMS = ROOT / "problems"

settings.register_profile(
    "repo",
    max_examples=100,
    deadline=None,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("repo")

# lines collected by the acceptance module, echoed in the terminal summary
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


def example41() -> ProblemSpec:
    return ProblemSpec(
        f=catalog.source("ex41_f"),
        g=catalog.coupling("gstar"),
        u=catalog.regulated("heaviside(0.5)"),
        beta=4.0,
        eta=0.25,
        bounds=BoundData(catalog.integrand("k41"), catalog.integrand("const(1)"), 1.0),
        name="example41",
    )


def example42() -> ProblemSpec:
    return ProblemSpec(
        f=catalog.source("ex42_f"),
        g=catalog.coupling("gstar"),
        u=catalog.regulated("weierstrass(1e-12)"),
        beta=-1.0 / 6.0,
        eta=2.0 / 3.0,
        bounds=BoundData(catalog.integrand("zero"), catalog.integrand("h42"), 1.0),
        name="example42",
    )


def constant_probe(c: float, beta: float, eta: float) -> ProblemSpec:
    """f = c, g = 0: T does not depend on x."""
    return ProblemSpec(
        f=SourceTerm(state=lambda t, x, c=c: np.full(np.broadcast(t, x).shape, c), name=f"const({c})"),
        g=CouplingTerm(time=constant(0.0), name="zero"),
        u=constant(0.0),
        beta=beta,
        eta=eta,
        name="constant-probe",
    )


def constant_fixed_point(t, c: float, beta: float, eta: float):
    t = np.asarray(t, float)
    return c * (1.0 + eta) * (t + beta) / 2.0 - c * t * t / 2.0


def zero_problem() -> ProblemSpec:
    return ProblemSpec(
        f=SourceTerm(name="zero"),
        g=CouplingTerm(time=constant(0.0)),
        u=constant(0.0),
        beta=0.0,
        eta=0.5,
        bounds=BoundData(catalog.integrand("zero"), catalog.integrand("zero"), 0.0),
        name="zero",
    )


@pytest.fixture(scope="session")
def ex41() -> ProblemSpec:
    return example41()


@pytest.fixture(scope="session")
def ex42() -> ProblemSpec:
    return example42()
