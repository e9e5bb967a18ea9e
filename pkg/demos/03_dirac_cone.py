"""Locate the Dirac pair at the superlattice K point and fit the cone.

At lambda = 0 the K-point eigenvalue |K*|^2 is threefold degenerate with one
state per rotation sector {1, tau, taubar}. A twisted potential whose
coefficient at -rho_-1 vanishes splits off the sector-1 state at second
order; the tau/taubar pair stays degenerate and carries a linear cone whose
slope matches the eigenvector velocity formula.
"""

import numpy as np

from twistbands import lattice as lat
from twistbands import potential as pot
from twistbands import spectra as sp

data = lat.classify_angle(2, 1)
V = pot.build_cosine_family([((1, 0), 1.0)])
W = pot.twist(V, pot.TwistSpec(data, "AA", "Additive"))
sup = lat.superlattice_basis(data)
sym = lat.symmetry_data(sup.kind)
K, _ = lat.high_symmetry_points(sup)
basis = sp.build_basis(sym, sup.dual_matrix, K,
                       8.0 * np.linalg.norm(sup.dual_matrix[:, 0]))
print("plane-wave basis: %d modes within cutoff %.3f"
      % (len(basis), basis.shell_cutoff))

lam = 0.5
rep = sp.find_dirac(basis, W, lam)
print("E0 = %.8f, multiplicity %d, sector-1 separation %.3e"
      % (rep.E0, rep.multiplicity, rep.separation_from_sector1))
print("|v_d| from eigenvectors: %.8f" % rep.v_d_magnitude)

ring = 0.125 * rep.separation_from_sector1 / rep.v_d_magnitude
slope, resid = sp.cone_fit(basis, W, lam, rep.E0, K, ring)
print("cone fit at ring %.2e: slope %.8f (rel diff %.2e), residual %.2e"
      % (ring, slope, abs(slope - rep.v_d_magnitude) / rep.v_d_magnitude,
         resid))

# band path Gamma -> K for plotting (see docs/plot_bands.py)
ks = [t * K for t in np.linspace(0.0, 1.0, 41)]
bands = sp.band_path(basis, W, lam, ks, n_bands=6)
sp.write_band_csv("bands_2_1.csv", ks, bands)
print("wrote bands_2_1.csv (%d k points x %d bands)" % bands.shape)
