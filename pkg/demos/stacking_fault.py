"""Coefficient profile across an extrinsic stacking fault in fcc.

Inserting one extra close-packed plane into ...ABCABC... breaks the cubic
stacking locally. The two planes next to the inserted one now sit between
identical layers (hcp-like), so their coefficient drops from the fcc value
4.04 to the hcp value 3.72. The inserted plane itself sits between two
different layers and stays fcc-like.

Run with ``python demos/stacking_fault.py``.
"""

from collections import Counter

from extracop import PerturbationConfig, analyze, generate_fcc_with_extrinsic_stacking_fault, \
    robust_voronoi_neighborhood


def main():
    system = generate_fcc_with_extrinsic_stacking_fault()
    r = analyze(system, robust_voronoi_neighborhood(system, PerturbationConfig(seed=0)))
    roles = [s.split(":")[0] for s in system.species]
    planes = [s.split(":")[1] for s in system.species]
    print(f"{system.n} particles; per-plane mean coefficient and modal (k, angle classes):\n")
    for plane in sorted(set(planes), key=lambda p: int(p[:-1])):
        idx = [i for i, p in enumerate(planes) if p == plane]
        mean_E = sum(r.E[i] for i in idx) / len(idx)
        modal = Counter((int(r.k[i]), int(r.unique_angles[i])) for i in idx).most_common(1)[0][0]
        bar = "#" * int(round((mean_E - 3.5) * 40))
        print(f"  plane {plane:>4s} {roles[idx[0]]:8s} E={mean_E:.4f} {modal}  {bar}")
    print("\nthe dip marks the two hcp-like planes on either side of the inserted one.")


if __name__ == "__main__":
    main()
