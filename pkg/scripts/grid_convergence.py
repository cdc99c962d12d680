"""Node values and sup norm of the computed fixed point as the grid is refined.

    python scripts/grid_convergence.py [--problem example42] [--levels 4]
"""

from __future__ import annotations

import argparse
from dataclasses import dataclass, fields
from pathlib import Path

import numpy as np

from distbvp.cli import load_problem
from distbvp.solver import SolveOptions, solve

ROOT = Path(__file__).resolve().parents[1]


@dataclass
class Config:
    problem: str = "example42"
    base_grid: int = 257
    levels: int = 4
    tol: float = 1e-10


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    for f in fields(Config):
        parser.add_argument(f"--{f.name.replace('_', '-')}", type=type(f.default), default=f.default)
    cfg = Config(**vars(parser.parse_args()))

    spec = load_problem(ROOT / "problems" / f"{cfg.problem}.problem").spec
    prev = None
    print(f"{'grid':>6} {'iters':>6} {'||x||':>20} {'d||x||':>10} {'max node change':>16}")
    for level in range(cfg.levels):
        n = (cfg.base_grid - 1) * 2**level + 1
        res = solve(spec, SolveOptions(grid=n, tol=cfg.tol, max_iter=400))
        sol = res.solution
        if prev is None:
            dnorm = node = float("nan")
        else:
            node = float(np.max(np.abs(prev.x - np.interp(prev.grid, sol.grid, sol.x))))
            dnorm = res.norm_x - prev_norm
        print(f"{n:>6} {res.iterations:>6} {res.norm_x:>20.14f} {dnorm:>10.2e} {node:>16.2e}")
        prev, prev_norm = sol, res.norm_x


if __name__ == "__main__":
    main()
