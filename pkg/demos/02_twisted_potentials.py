"""Build a honeycomb cosine potential and twist it at a commensurate angle.

The single-orbit cosine V(x) = sum_j cos(<kappa B^j (1,0), x>) is rotation
invariant and real. Twisting superposes the two layer copies; in Fourier
space each layer coefficient lands on a coupling sublattice of the
superlattice dual, and the union misses the three distinguished indices
rho_1, rho_-1, rho_1 - rho_-1 for every angle except theta = pi/6.
"""

import numpy as np

from twistbands import lattice as lat
from twistbands import potential as pot

V = pot.build_cosine_family([((1, 0), 1.0)])
rep = pot.validate_honeycomb(V)
print("single layer: %d modes, honeycomb symmetric: %s" % (len(V), rep.ok))

for a, b in [(2, 1), (5, 3), (3, 1)]:
    data = lat.classify_angle(a, b)
    sup = lat.superlattice_basis(data)
    sym = lat.symmetry_data(sup.kind)
    W = pot.twist(V, pot.TwistSpec(data, "AA", "Additive"))
    ok, offending = pot.support_check(W, lat.coupling_matrices(data))
    rho1 = tuple(int(x) for x in sym.rho_plus)
    print("(%d,%d): %3d modes, support on coupling lattices: %s, "
          "|W_rho1| = %.4f" % (a, b, len(W), ok, abs(W.get(rho1))))

# AB stacking shifts one layer by a half lattice vector before averaging;
# the result is still real but the coefficients pick up phase averages
data = lat.classify_angle(2, 1)
W_ab = pot.twist(V, pot.TwistSpec(data, "AB", "Additive"))
imag = max(abs(np.imag(sum(c * np.exp(0j) for c in W_ab.coefficients.values()))), 0)
print("\nAB twist at (2,1): %d modes, coefficient sum imag %.2e"
      % (len(W_ab), imag))

# pointwise products twist through Fourier convolution of the layer maps
W_prod = pot.twist(V, pot.TwistSpec(data, "AA", "PointwiseProduct"),
                   product_cutoff=40.0)
print("product combiner: %d modes within cutoff" % len(W_prod))
