"""Classify commensurate twist angles and verify the lattice-intersection claim.

For coprime (a, b) with 0 < b < a the angle tan(theta) = sqrt(3) b / a is
commensurate: the rotated triangular lattice meets the unrotated one in a
scaled copy N Lambda or N Lambda*. This script tabulates the classification
up to a = 7 and cross-checks one pair against a brute-force intersection.
"""

import numpy as np

from twistbands import lattice as lat

rows = lat.angle_table(7)
print("%4s %4s %10s %4s %4s %10s %-12s" %
      ("a", "b", "theta", "eps", "3|a", "N", "superlattice"))
for r in rows:
    print("%4d %4d %10.6f %4d %4d %10.6f %-12s" %
          (r["a"], r["b"], r["theta_rad"], r["epsilon"], r["rho_flag"],
           r["N"], r["superlattice"]))

# the special angle pi/6: R Lambda meets Lambda in a Lambda* copy
d31 = lat.classify_angle(3, 1)
print("\n(3,1): theta = pi/6, N = %.12f = sqrt(3)/(4 pi) -> %s"
      % (d31.N, d31.superlattice_kind))

# independent check at (2,1): enumerate common points inside radius 3N
data = lat.classify_angle(2, 1)
sup = lat.superlattice_basis(data)
found = lat.brute_force_intersection(data, 3.0 * data.N)
claimed = lat.lattice_points_in_disk(sup.basis_matrix, np.zeros(2), 3.0 * data.N)
print("\n(2,1) brute force: %d common points, closed form predicts %d"
      % (len(found), len(claimed)))

# the coupling matrices and the Bezout decomposition behind the twist algebra
cm = lat.coupling_matrices(data)
sym = lat.symmetry_data(sup.kind)
v_plus, v_minus = lat.bezout_shift_decomposition(data)
lhs = cm.NA_plus @ v_plus + cm.NA_minus @ v_minus
print("NA+ v+ + NA- v- = %s  (rho_minus = %s)" % (lhs, sym.rho_minus))
