"""Truncated plane-wave Bloch Hamiltonians H(k) = -Delta + lambda W.

The pseudo-periodic space at quasimomentum k is spanned by plane waves
exp(i <k + kappa~ m, x>) over integer indices m; truncation keeps the modes
with |K*(m)| below a reciprocal-space cutoff.  At the high-symmetry point the
index set is closed under the affine rotation action m -> B m + rho_1, which
acts on coefficient vectors as a permutation; diagonalizing it inside each
eigenvalue cluster labels eigenvectors by the rotation eigenvalue
sigma in {1, tau, tau_bar}, tau = exp(2 pi i / 3).

Dirac cones are detected as the lowest cluster carrying the {tau, tau_bar}
pair, their velocity evaluated from the eigenvector formula
v_d = 2 sum_m conj(Phi1[m]) (K* + kappa~ m)_1 Phi2[m] with
Phi2 = conj(Phi1) coefficient-wise, and cross-checked by least-squares cone
fits on small rings around K*.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np
import scipy.linalg

from . import lattice as lat
from .potential import FourierPotential

TAU = lat.TAU

EIGENSOLVE_DIM_GUARD = 4096

SECTOR_VALUES = {"1": 1.0 + 0.0j, "tau": TAU, "taubar": np.conj(TAU)}


class ComputeGuardError(RuntimeError):
    """A desk-scale resource guard was exceeded."""


class DiracDetectionError(RuntimeError):
    """No valid Dirac pair could be identified at this lambda."""


class ConeFitError(RuntimeError):
    """Band tracking around the cone was ambiguous."""


@dataclass(frozen=True)
class PlaneWaveBasis:
    indices: tuple
    k_anchor: np.ndarray
    dual: np.ndarray
    sym: lat.SymmetryData
    shell_cutoff: float
    rotation_perm: Optional[np.ndarray] = None

    def index_of(self) -> dict:
        return {m: i for i, m in enumerate(self.indices)}

    def embedded(self, k: Optional[np.ndarray] = None) -> np.ndarray:
        """The vectors k + dual m for every index, as an (n, 2) array."""
        kk = self.k_anchor if k is None else np.asarray(k, dtype=float)
        mm = np.array(self.indices, dtype=float)
        return kk[None, :] + mm @ self.dual.T

    def __len__(self):
        return len(self.indices)


def build_basis(sym: lat.SymmetryData, dual: np.ndarray, K_star: np.ndarray,
                shell_cutoff: float) -> PlaneWaveBasis:
    """Orbit-closed index set {m : |K* + dual m| <= shell_cutoff} with its permutation.

    The affine action is an isometry of the shifted lattice, so orbit closure
    adds nothing beyond guarding against boundary roundoff; indices are sorted
    by (|K*(m)|, lexicographic) for determinism.
    """
    K_star = np.asarray(K_star, dtype=float)
    if not shell_cutoff > np.linalg.norm(K_star):
        raise ValueError("shell_cutoff must exceed |K*|")
    pts = lat.lattice_points_in_disk(dual, K_star, shell_cutoff)
    pool = {(int(p[0]), int(p[1])) for p in pts}
    closed = set()
    for m in pool:
        closed.update(lat.index_orbit(sym, m))

    def norm_of(m):
        v = K_star + dual @ np.array(m, dtype=float)
        return float(np.linalg.norm(v))

    indices = tuple(sorted(closed, key=lambda m: (round(norm_of(m), 12), m)))
    index_of = {m: i for i, m in enumerate(indices)}
    perm = np.empty(len(indices), dtype=np.int64)
    for i, m in enumerate(indices):
        im = tuple(int(x) for x in sym.B @ np.array(m, dtype=np.int64) + sym.rho_plus)
        perm[i] = index_of[im]
    return PlaneWaveBasis(indices, K_star, np.asarray(dual, dtype=float), sym,
                          float(shell_cutoff), perm)


def assemble(basis: PlaneWaveBasis, k: np.ndarray, lam: float,
             W: FourierPotential) -> np.ndarray:
    """H[i, j] = |k + dual m_i|^2 delta_ij + lambda W_{m_i - m_j}.

    Hermiticity is enforced structurally: each coefficient pair (d, -d) fills
    mirrored entries with exact conjugates.
    """
    if W.coefficients and np.abs(W.lattice.dual_matrix - basis.dual).max() > 1e-12:
        raise ValueError("potential and basis live on different dual lattices")
    n = len(basis)
    emb = basis.embedded(k)
    H = np.zeros((n, n), dtype=complex)
    H[np.diag_indices(n)] = np.einsum("ij,ij->i", emb, emb)
    if lam == 0.0 or not W.coefficients:
        return H
    index_of = basis.index_of()
    done = set()
    for d, c in W.coefficients.items():
        if d in done:
            continue
        nd = (-d[0], -d[1])
        done.add(d)
        done.add(nd)
        for j, mj in enumerate(basis.indices):
            mi = (mj[0] + d[0], mj[1] + d[1])
            i = index_of.get(mi)
            if i is None:
                continue
            if d == nd:
                H[i, j] += lam * c.real
            else:
                H[i, j] += lam * c
                H[j, i] += lam * np.conj(c)
    return H


@dataclass(frozen=True)
class BlochSpectrum:
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    sector_labels: Optional[tuple] = None


def eigensolve(H: np.ndarray) -> BlochSpectrum:
    """Full ascending Hermitian eigendecomposition (dense, deterministic)."""
    n = H.shape[0]
    if n > EIGENSOLVE_DIM_GUARD:
        raise ComputeGuardError("matrix dimension %d exceeds the guard %d"
                                % (n, EIGENSOLVE_DIM_GUARD))
    vals, vecs = scipy.linalg.eigh(H)
    return BlochSpectrum(vals, vecs)


def _clusters(vals: np.ndarray, tol: float):
    """Single-linkage clusters of sorted eigenvalues at relative gap tol."""
    groups = [[0]]
    for i in range(1, len(vals)):
        if vals[i] - vals[i - 1] <= tol * max(1.0, abs(vals[i])):
            groups[-1].append(i)
        else:
            groups.append([i])
    return groups


def sector_decompose(spec: BlochSpectrum, basis: PlaneWaveBasis,
                     degeneracy_tol: float = 1e-8) -> BlochSpectrum:
    """Relabel eigenvectors by the rotation eigenvalue sigma within each cluster.

    The permutation operator P (coefficient c_m -> slot B m + rho_1) commutes
    with H for honeycomb potentials; inside each eigenvalue cluster the
    sigma-isotypic components are extracted with the projector
    (1/3) sum_l conj(sigma)^l P^l and orthonormalized.  Vectors whose rotation
    residual exceeds 1e-6 are labeled "mixed".
    """
    if basis.rotation_perm is None:
        raise ValueError("basis is not anchored at a high-symmetry point")
    perm = basis.rotation_perm
    n = len(basis)
    vals = spec.eigenvalues
    vecs = spec.eigenvectors.copy()
    labels = ["mixed"] * n

    def apply_P(X, power=1):
        out = X
        for _ in range(power):
            Y = np.zeros_like(out)
            Y[perm, :] = out
            out = Y
        return out

    for group in _clusters(vals, degeneracy_tol):
        C = vecs[:, group]
        new_cols = []
        new_labels = []
        for name, sigma in SECTOR_VALUES.items():
            A = (C + np.conj(sigma) * apply_P(C) + np.conj(sigma) ** 2 * apply_P(C, 2)) / 3.0
            U, s, _ = np.linalg.svd(A, full_matrices=False)
            for col in range(len(group)):
                if s[col] > 0.5:
                    new_cols.append(U[:, col])
                    new_labels.append(name)
        if len(new_cols) == len(group):
            block = np.stack(new_cols, axis=1)
            for offset, i in enumerate(group):
                v = block[:, offset]
                sigma = SECTOR_VALUES[new_labels[offset]]
                if np.linalg.norm(apply_P(v[:, None])[:, 0] - sigma * v) < 1e-6:
                    vecs[:, i] = v
                    labels[i] = new_labels[offset]
                else:
                    vecs[:, i] = spec.eigenvectors[:, i]
        # else: projections did not resolve the cluster; keep "mixed"
    return BlochSpectrum(vals, vecs, tuple(labels))


@dataclass(frozen=True)
class DiracReport:
    E0: float
    multiplicity: int
    v_d_formula: complex
    v_d_magnitude: float
    cone_fit_slope: float
    cone_fit_residual: float
    lam: float
    K_star: tuple
    separation_from_sector1: float
    basis_size: int
    shell_cutoff: float


def find_dirac(basis: PlaneWaveBasis, W: FourierPotential, lam: float,
               degeneracy_tol: float = 1e-8) -> DiracReport:
    """Detect the {tau, taubar} pair at K* and evaluate the velocity formula.

    The lowest eigenvalue cluster containing both a tau and a taubar vector is
    the candidate cone tip; at lambda = 0 this is the free triple crossing
    (multiplicity 3), otherwise a clean pair has multiplicity exactly 2.
    Phi2 is the coefficient-wise conjugate of the tau vector Phi1 and lands in
    the taubar sector, so only Phi1's arbitrary phase enters, and it cancels
    in |v_d|.
    """
    H = assemble(basis, basis.k_anchor, lam, W)
    sd = sector_decompose(eigensolve(H), basis, degeneracy_tol)
    vals, labels = sd.eigenvalues, sd.sector_labels
    groups = _clusters(vals, degeneracy_tol)
    target = None
    for g in groups:
        names = [labels[i] for i in g]
        if "mixed" in names:
            raise DiracDetectionError("mixed sector labels; degeneracy_tol too coarse")
        if "tau" in names and "taubar" in names:
            target = g
            break
    if target is None:
        raise DiracDetectionError("no two-fold cluster found at this lambda")
    E0 = float(np.mean(vals[target]))
    phi1 = sd.eigenvectors[:, next(i for i in target if labels[i] == "tau")]
    phi2 = np.conj(phi1)
    emb = basis.embedded()
    v_d = 2.0 * np.sum(np.conj(phi1) * emb[:, 0] * phi2)
    sector1 = [vals[i] for i in range(len(vals))
               if labels[i] == "1" and i not in target]
    in_cluster1 = [vals[i] for i in target if labels[i] == "1"]
    if in_cluster1:
        separation = 0.0
    elif sector1:
        separation = float(min(abs(v - E0) for v in sector1))
    else:
        separation = math.inf
    return DiracReport(E0, len(target), complex(v_d), float(abs(v_d)),
                       math.nan, math.nan, float(lam),
                       (float(basis.k_anchor[0]), float(basis.k_anchor[1])),
                       separation, len(basis), basis.shell_cutoff)


def cone_fit(basis: PlaneWaveBasis, W: FourierPotential, lam: float, E0: float,
             K_star: np.ndarray, ring_radius: float, n_angles: int = 12):
    """Least-squares cone slope from rings at radii {r, r/2} around K*.

    At each ring point the two eigenvalues nearest E0 are the cone bands;
    matching between the radii is validated by eigenvector overlap > 0.9 and
    a third band entering within twice the cone width raises ConeFitError.
    The quadratic contamination is removed by the two-radius combination
    s = (4 d(r/2) - d(r)) / r per band and angle; the returned residual is the
    maximum relative misfit of the plain linear model at the outer radius.
    """
    if n_angles < 8:
        raise ValueError("n_angles must be at least 8")
    K_star = np.asarray(K_star, dtype=float)
    r = float(ring_radius)
    slopes = []
    max_resid = 0.0
    for j in range(n_angles):
        phi = 2.0 * math.pi * j / n_angles
        u = np.array([math.cos(phi), math.sin(phi)])
        devs = []
        prev_vecs = None
        for rr in (r, r / 2.0):
            es = eigensolve(assemble(basis, K_star + rr * u, lam, W))
            order = np.argsort(np.abs(es.eigenvalues - E0))
            pair = np.sort(order[:2])
            third = order[2]
            width = np.abs(es.eigenvalues[pair] - E0).max()
            if abs(es.eigenvalues[third] - E0) < 2.0 * width:
                raise ConeFitError(
                    "third band within twice the cone width at r=%.3g phi=%.3g"
                    % (rr, phi))
            vecs = es.eigenvectors[:, pair]
            if prev_vecs is not None:
                overlap = np.abs(prev_vecs.conj().T @ vecs)
                if np.linalg.svd(overlap, compute_uv=False).min() < 0.9:
                    raise ConeFitError("band tracking lost between radii")
            prev_vecs = vecs
            devs.append(np.abs(es.eigenvalues[pair] - E0))
        d_r, d_half = devs
        for band in range(2):
            s = (4.0 * d_half[band] - d_r[band]) / r
            slopes.append(s)
            if s > 0:
                max_resid = max(max_resid, abs(d_r[band] - s * r) / (s * r))
    slope = float(np.mean(slopes))
    return slope, float(max_resid)


def band_path(basis_template: PlaneWaveBasis, W: FourierPotential, lam: float,
              k_list: Sequence, n_bands: int = 8,
              parallel_map: Optional[Callable] = None) -> np.ndarray:
    """Lowest n_bands at each k, re-truncating the basis around each k.

    The per-k index set is {m : |k + dual m| <= shell_cutoff} without orbit
    closure (general k carries no rotation symmetry).  Returns an array of
    shape (len(k_list), n_bands); gathering preserves input order.
    """
    if len(k_list) == 0:
        raise ValueError("k_list must be nonempty")
    dual = basis_template.dual
    cutoff = basis_template.shell_cutoff
    sym = basis_template.sym

    def solve_one(k):
        k = np.asarray(k, dtype=float)
        pts = lat.lattice_points_in_disk(dual, k, cutoff)
        indices = tuple(sorted((int(p[0]), int(p[1])) for p in pts))
        sub = PlaneWaveBasis(indices, k, dual, sym, cutoff, None)
        es = eigensolve(assemble(sub, k, lam, W))
        if len(es.eigenvalues) < n_bands:
            raise ComputeGuardError("fewer basis states than requested bands")
        return es.eigenvalues[:n_bands]

    mapper = parallel_map if parallel_map is not None else map
    return np.array(list(mapper(solve_one, [np.asarray(k, float) for k in k_list])))


# --- output formats -------------------------------------------------------

def format_float(x: float) -> str:
    return "%.17g" % x


def write_band_csv(path: str, k_list, bands: np.ndarray) -> None:
    """CSV with header idx,kx,ky,E1..En and 17-significant-digit floats."""
    bands = np.atleast_2d(bands)
    n = bands.shape[1]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["idx", "kx", "ky"] + ["E%d" % (i + 1) for i in range(n)])
        for i, (k, row) in enumerate(zip(k_list, bands)):
            writer.writerow([str(i), format_float(float(k[0])), format_float(float(k[1]))]
                            + [format_float(float(e)) for e in row])


def dirac_report_dict(report: DiracReport, condition: Optional[str] = None) -> dict:
    doc = {
        "E0": report.E0,
        "multiplicity": report.multiplicity,
        "v_d_formula": {"re": report.v_d_formula.real, "im": report.v_d_formula.imag},
        "v_d_magnitude": report.v_d_magnitude,
        "cone_fit_slope": report.cone_fit_slope,
        "cone_fit_residual": report.cone_fit_residual,
        "lambda": report.lam,
        "K_star": list(report.K_star),
        "separation_from_sector1": report.separation_from_sector1,
        "basis_size": report.basis_size,
        "shell_cutoff": report.shell_cutoff,
    }
    if condition is not None:
        doc["condition"] = condition
    return doc


def write_dirac_report(path: str, report: DiracReport,
                       condition: Optional[str] = None) -> None:
    with open(path, "w") as fh:
        json.dump(dirac_report_dict(report, condition), fh, indent=1)
        fh.write("\n")
