"""Velocity flattening along a family of commensurate angles.

With coupling strength lambda = delta / N^2 the product N |v_d| stays within
a bounded ratio across the family: the Dirac velocity at the superlattice K
point scales like 1/N while the potential is scaled down quadratically.
The perturbative expansion explains the per-angle correction: the remainder
after the quadratic model decays like lambda^3.
"""

import numpy as np

from twistbands import lattice as lat
from twistbands import perturbation as pert
from twistbands import potential as pot
from twistbands import spectra as sp

family = [(2, 1), (5, 1), (7, 1), (8, 1)]
rows = pert.scaling_study([((1, 0), 1.0)], family, delta=1.0)
print("%4s %4s %8s %10s %12s %12s" % ("a", "b", "N", "lambda", "|v_d|", "N|v_d|"))
for r in rows:
    print("%4d %4d %8.4f %10.6f %12.8f %12.8f" %
          (r.a, r.b, r.N, r.lam, r.vd_abs, r.N_times_vd))
print("max/min of N|v_d|: %.6f" % pert.scaling_ratio(rows))
pert.write_scaling_csv("scaling_b1.csv", rows)

# consistency of the quadratic model at the reference angle
data = lat.classify_angle(2, 1)
W = pot.twist(pot.build_cosine_family([((1, 0), 1.0)]),
              pot.TwistSpec(data, "AA", "Additive"))
sup = lat.superlattice_basis(data)
sym = lat.symmetry_data(sup.kind)
K, _ = lat.high_symmetry_points(sup)
cutoff = 8.0 * np.linalg.norm(sup.dual_matrix[:, 0])
basis = sp.build_basis(sym, sup.dual_matrix, K, cutoff)
S = pot.choose_S_with_zero_pattern(
    W, sym, lat.orbit_representatives(sym, sup, K, cutoff))
so = pert.second_order(W, sym, S, K, sup.dual_matrix)
print("\nsecond-order split E2_tau - E2_1 = %.10f" % so.predicted_split)
cc = pert.consistency_check(W, sym, K, [1e-3, 2e-3, 4e-3, 8e-3], basis, S)
for name, slope in cc.exponents.items():
    print("remainder exponent sector %-7s %.3f" % (name, slope))
