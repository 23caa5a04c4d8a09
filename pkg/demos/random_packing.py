"""Rank statistics of the coefficient on a random packing.

In a Poisson-disk packing every particle has a different environment. The
coefficient rises with the coordination number, and it is spatially
autocorrelated: a particle's E correlates with the mean E of the particles
around it, most strongly for balls of about 1.5 to 1.7 nearest-neighbor
distances.

Run with ``python demos/random_packing.py``.
"""

import math

from extracop import (
    PackingSpec,
    PerturbationConfig,
    SeedPolicy,
    analyze,
    autocorrelation_report,
    classify_meshiness,
    generate_poisson_disk,
    robust_voronoi_neighborhood,
)


def main():
    system = generate_poisson_disk(PackingSpec(2, 1.0, (60.0, 60.0), seed=SeedPolicy(4)))
    nm = robust_voronoi_neighborhood(system, PerturbationConfig(seed=4))
    r = analyze(system, nm)
    mask = system.interior_mask(2.0 * system.median_nn_distance)
    print(f"2D packing: {system.n} particles, {int(mask.sum())} interior")
    print(f"mesh classification: {classify_meshiness(system, nm, mask).kind}")

    rep = autocorrelation_report(system, r, [1.0 + 0.1 * i for i in range(21)], mask)
    print(f"Spearman rho(E, k)            = {rep.rho_E_k:.3f}")
    print(f"Spearman rho(E, local mean E) = {rep.rho_E_localmean:.3f} at R = {rep.best_radius:.1f} <r_p>")
    print("\nrho by ball radius:")
    for R, rho in zip(rep.radius_grid, rep.rho_by_radius):
        if math.isnan(rho):
            print(f"  R={R:.1f}  undefined (some balls hold no other particle)")
        else:
            print(f"  R={R:.1f} {rho:6.3f} {'#' * max(0, int(round(rho * 50)))}")


if __name__ == "__main__":
    main()
