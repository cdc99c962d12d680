"""Partition sums under doubling: bounded variation versus the Weierstrass series.

    python scripts/tv_doubling.py [--terms 8] [--refinements 16]
"""

from __future__ import annotations

import argparse
from dataclasses import dataclass, fields

import numpy as np

from distbvp.regulated import TV_START_INTERVALS, ClosedForm, Weierstrass, _partition_sums, total_variation


@dataclass
class Config:
    terms: int = 8
    refinements: int = 16


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    for f in fields(Config):
        parser.add_argument(f"--{f.name}", type=type(f.default), default=f.default)
    cfg = Config(**vars(parser.parse_args()))

    subjects = {
        f"W ({cfg.terms} terms)": Weierstrass(n_terms=cfg.terms),
        "sin(6 pi t)": ClosedForm(lambda t: np.sin(6 * np.pi * t), "sin6pi"),
    }
    sums = {name: list(_partition_sums(f, cfg.refinements)) for name, f in subjects.items()}
    print(f"{'intervals':>10} " + " ".join(f"{name:>22}" for name in subjects))
    for k in range(cfg.refinements + 1):
        print(f"{TV_START_INTERVALS << k:>10} " + " ".join(f"{sums[name][k]:>22.10f}" for name in subjects))
    for name, f in subjects.items():
        bv = total_variation(f, cfg.refinements)
        print(f"{name}: {bv.status}, bound {bv.total_variation_bound}")


if __name__ == "__main__":
    main()
