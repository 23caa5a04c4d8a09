"""Why robustified neighborhoods, and what each crystal's coefficient looks like.

A perfect fcc crystal is the worst case for plain Voronoi neighborhoods: every
particle sits on many shared circumspheres, so the triangulation picks an
arbitrary tie-break and particles get anywhere from 12 to 18 neighbors. Random
whole-system perturbations plus a majority vote recover the 12 nearest
neighbors, and the coefficient then reads off the symmetry of each crystal.

Run with ``python demos/crystal_fingerprints.py``.
"""

from collections import Counter

import numpy as np

from extracop import (
    PerturbationConfig,
    analyze,
    lattice,
    naive_neighborhood,
    robust_voronoi_neighborhood,
    voronoi_neighborhood,
)


def main():
    fcc = lattice("fcc", 4)
    print(f"fcc crystal, {fcc.n} particles, periodic box {fcc.box}")

    naive = len(naive_neighborhood(fcc, 0, tau=1 / 3))
    plain = Counter(len(v) for v in voronoi_neighborhood(fcc, check_degeneracy=False))
    robust = robust_voronoi_neighborhood(fcc, PerturbationConfig(seed=0))
    print(f"  naive N_1/3 of particle 0:       {naive} candidates")
    print(f"  plain Voronoi (tie-broken) k:    {dict(sorted(plain.items()))}")
    print(f"  robustified Voronoi k:           {dict(Counter(robust.coordination_numbers.tolist()))}"
          f" after {robust.samples} perturbation samples")

    print("\ncoefficient of each crystal (bits; higher means more symmetric):")
    for kind in ("fcc", "hcp", "bcc", "simple-cubic", "hexagonal", "square"):
        system = lattice(kind, 5)
        r = analyze(system, robust_voronoi_neighborhood(system, PerturbationConfig(seed=1)))
        k, unique, E = int(r.k[0]), int(r.unique_angles[0]), float(r.E[0])
        uniform = np.ptp(r.E) == 0
        print(f"  {kind:13s} k={k:2d} angle classes={unique} E={E:.4f}"
              f"{'' if uniform else '  (not uniform!)'}")
    print("\nhcp scores 3.72 rather than its analytic 3.46: the 5 degree discretization merges two"
          "\nof its six angle groups, the documented discretization bias.")


if __name__ == "__main__":
    main()
