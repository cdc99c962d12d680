"""Extrapolating truncated integrals of the oscillatory h towards its singular point.

Hard cut-offs int_eps^1 h = H(1) - H(eps) are taken from the exact primitive, so
the table isolates the extrapolation itself. The eps^2 sin(eps^-2) term keeps the
two-sweep Richardson values wandering at the 1e-6 level until eps is near 1e-4,
where [eps, 2 eps] holds about 1e12 oscillations and no quadrature could supply
the truncated integrals. The library's ramped cut-off (last line) damps that
term and settles while the panels are still resolvable.

    python scripts/improper_convergence.py [--tol 1e-6] [--levels 24]
"""

from __future__ import annotations

import argparse
import math
from dataclasses import dataclass, fields

from distbvp import catalog
from distbvp.integrate import IMPROPER, hk_integrate


@dataclass
class Config:
    tol: float = 1e-6
    levels: int = 24


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    for f in fields(Config):
        parser.add_argument(f"--{f.name}", type=type(f.default), default=f.default)
    cfg = Config(**vars(parser.parse_args()))

    h = catalog.integrand("h42")
    exact = 1.0 + math.sin(1.0)
    J, R1, R2 = [], [], []
    print(f"{'eps':>12} {'hard cut-off error':>20} {'extrapolated error':>20}")
    for k in range(cfg.levels):
        eps = 0.1 * 2.0**-k
        J.append(float(h.antiderivative(1.0) - h.antiderivative(eps)))
        if k >= 1:
            R1.append(2 * J[-1] - J[-2])
        if k >= 2:
            R2.append((4 * R1[-1] - R1[-2]) / 3)
        extrap = f"{R2[-1] - exact:>20.3e}" if R2 else f"{'':>20}"
        print(f"{eps:>12.3e} {J[-1] - exact:>20.3e} {extrap}")
    res = hk_integrate(h, 0.0, 1.0, tol=cfg.tol, method=IMPROPER)
    print(f"ramped cut-off, extrapolated: {res.value:.12f}  error {res.value - exact:.2e}  "
          f"estimate {res.error_estimate:.2e}")


if __name__ == "__main__":
    main()
