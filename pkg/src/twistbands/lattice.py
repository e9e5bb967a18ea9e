"""Exact arithmetic and geometry of commensurate twisted honeycomb lattices.

The triangular lattice is Lambda = nu Z^2 with columns v1 = (sqrt(3)/2, 1/2)
and v2 = (sqrt(3)/2, -1/2), so the lattice constant is 1.  Its dual is
Lambda* = kappa Z^2 with kappa^T nu = 2 pi I.  A twist angle theta is
commensurate when tan(theta) = sqrt(3) b / a with coprime integers
0 < b < a, and the intersection lattice R_theta Lambda and R_{-theta} Lambda
equals N Lambda (when 3 does not divide a) or N Lambda* (when it does),
with N = sqrt(a^2 + 3 b^2) / alpha and alpha drawn from a four-case table.

Everything that can be kept in integers is kept in integers: the coupling
matrices N A_{+-1}, the rotation index matrix B, the shift vectors rho, and
the Bezout decomposition of rho_{-1}.  Floating point enters only through
the embeddings into R^2, with tolerances 1e-9 (geometric matching) and
1e-12 (orthogonality).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Iterable, Optional

import numpy as np

GEOM_TOL = 1e-9
ORTHO_TOL = 1e-12

SQRT3 = math.sqrt(3.0)

# Lattice basis nu and its dual kappa, as column matrices.
NU = np.array([[SQRT3 / 2.0, SQRT3 / 2.0], [0.5, -0.5]])
KAPPA = (4.0 * math.pi / SQRT3) * np.array([[0.5, 0.5], [SQRT3 / 2.0, -SQRT3 / 2.0]])

TAU = complex(math.cos(2.0 * math.pi / 3.0), math.sin(2.0 * math.pi / 3.0))

# The order-3 lattice rotation paired with the integer tables in symmetry_data:
# with nu fixed as above, dual_matrix @ B = ROT3 @ dual_matrix holds for this
# orientation (the opposite orientation pairs with the transposed tables).
ROT3 = np.array([[-0.5, SQRT3 / 2.0], [-SQRT3 / 2.0, -0.5]])

DIRECT = "Lambda"
DUAL = "LambdaStar"


@dataclass(frozen=True)
class HoneycombBasis:
    """A (possibly scaled) honeycomb lattice with its dual.

    kind records whether the lattice is a scaling of Lambda ("Lambda") or of
    Lambda* ("LambdaStar"); the distinction selects the symmetry tables and
    the high-symmetry-point formula downstream.
    """

    basis_matrix: np.ndarray
    dual_matrix: np.ndarray
    kind: str

    def __post_init__(self):
        err = np.abs(self.dual_matrix.T @ self.basis_matrix - 2.0 * math.pi * np.eye(2)).max()
        if err > 1e-9 * max(1.0, np.abs(self.dual_matrix).max()):
            raise ValueError("basis and dual are not 2*pi-dual (residual %.3e)" % err)
        if self.kind not in (DIRECT, DUAL):
            raise ValueError("kind must be %r or %r" % (DIRECT, DUAL))


def unit_lattice() -> HoneycombBasis:
    """The unit triangular lattice Lambda with dual kappa."""
    return HoneycombBasis(NU.copy(), KAPPA.copy(), DIRECT)


def unit_dual_lattice() -> HoneycombBasis:
    """Lambda* viewed as a lattice in its own right (dual is nu)."""
    return HoneycombBasis(KAPPA.copy(), NU.copy(), DUAL)


@dataclass(frozen=True)
class CommensurationData:
    """Arithmetic data of a commensurate twist angle tan(theta) = sqrt(3) b / a."""

    a: int
    b: int
    theta: float
    epsilon: int
    rho_flag: int
    alpha: float
    alpha_class: str
    N: float
    superlattice_kind: str


def classify_angle(a: int, b: int) -> CommensurationData:
    """Classify the commensurate angle with tan(theta) = sqrt(3) b / a.

    Args:
        a, b: coprime integers with 0 < b < a.

    Returns:
        CommensurationData with epsilon (1 iff a*b odd), rho_flag (1 iff 3 | a),
        alpha from the table {(1,1): 8 pi, (0,1): 2, (1,0): 4 pi, (0,0): 1}
        keyed on (rho_flag, epsilon), N = sqrt(a^2 + 3 b^2) / alpha, and the
        superlattice kind (N Lambda* iff 3 | a).
    """
    if a != int(a) or b != int(b):
        raise ValueError("a and b must be integers")
    a, b = int(a), int(b)
    if not (0 < b < a):
        raise ValueError("need 0 < b < a (reduce the angle first); got (%d, %d)" % (a, b))
    if math.gcd(a, b) != 1:
        raise ValueError("a and b must be coprime; gcd(%d, %d) = %d" % (a, b, math.gcd(a, b)))

    epsilon = 1 if (a * b) % 2 == 1 else 0
    rho_flag = 1 if a % 3 == 0 else 0
    alpha_table = {
        (1, 1): (8.0 * math.pi, "8pi"),
        (0, 1): (2.0, "2"),
        (1, 0): (4.0 * math.pi, "4pi"),
        (0, 0): (1.0, "1"),
    }
    alpha, alpha_class = alpha_table[(rho_flag, epsilon)]
    theta = math.atan2(SQRT3 * b, a)
    N = math.sqrt(a * a + 3 * b * b) / alpha
    kind = DUAL if rho_flag else DIRECT
    return CommensurationData(a, b, theta, epsilon, rho_flag, alpha, alpha_class, N, kind)


def reduce_angle(theta: float) -> float:
    """Reduce theta in [0, 2 pi) to the fundamental interval [0, pi/3)."""
    return float(theta % (math.pi / 3.0))


def rotation_matrix(data: CommensurationData) -> np.ndarray:
    """R_theta = (1 / (alpha N)) [[a, -sqrt(3) b], [sqrt(3) b, a]]."""
    s = 1.0 / (data.alpha * data.N)
    return s * np.array([[data.a, -SQRT3 * data.b], [SQRT3 * data.b, data.a]])


def superlattice_basis(data: CommensurationData) -> HoneycombBasis:
    """The intersection lattice N Lambda or N Lambda* with its dual."""
    if data.superlattice_kind == DIRECT:
        return HoneycombBasis(data.N * NU, KAPPA / data.N, DIRECT)
    return HoneycombBasis(data.N * KAPPA, NU / data.N, DUAL)


@dataclass(frozen=True)
class CouplingMatrices:
    """Integer matrices N A_{+1}, N A_{-1} mapping layer indices into the superlattice grid."""

    NA_plus: np.ndarray
    NA_minus: np.ndarray
    N_squared: float
    det_plus: int


def coupling_matrices(data: CommensurationData) -> CouplingMatrices:
    """Exact integer coupling matrices N A_{+-1} = N (N kappa_theta)^{-1} R_{+-theta} kappa.

    kappa case (3 does not divide a): N A_1 = 2^{-eps} [[a-b, 2b], [-2b, a+b]].
    nu case (3 | a): N A_1 = (1 / (3 * 2^eps)) [[2a, -a+3b], [-a-3b, 2a]].
    N A_{-1} is the same closed form with b -> -b.
    """
    a, b, eps = data.a, data.b, data.epsilon

    def closed_form(bb: int) -> np.ndarray:
        if data.rho_flag == 0:
            num = np.array([[a - bb, 2 * bb], [-2 * bb, a + bb]], dtype=np.int64)
            den = 2 ** eps
        else:
            num = np.array([[2 * a, -a + 3 * bb], [-a - 3 * bb, 2 * a]], dtype=np.int64)
            den = 3 * 2 ** eps
        if np.any(num % den != 0):
            raise ArithmeticError("non-integer coupling matrix for (a, b) = (%d, %d)" % (a, b))
        return num // den

    NA_plus = closed_form(b)
    NA_minus = closed_form(-b)
    det_plus = int(round(np.linalg.det(NA_plus.astype(float))))

    # Float cross-check against the defining product N * (N kappa_theta)^{-1} R_theta kappa.
    sup = superlattice_basis(data)
    R = rotation_matrix(data)
    direct = data.N * np.linalg.solve(data.N * sup.dual_matrix, R @ KAPPA)
    if np.abs(direct - NA_plus).max() > 1e-9 * max(1, abs(a), abs(b)):
        raise ArithmeticError("coupling matrix closed form disagrees with definition")

    return CouplingMatrices(NA_plus, NA_minus, data.N ** 2, det_plus)


@dataclass(frozen=True)
class SymmetryData:
    """Affine action m -> B^l m + rho_l of the 2 pi / 3 rotation on plane-wave indices."""

    B: np.ndarray
    rho_plus: np.ndarray
    rho_minus: np.ndarray
    k_point_sign: str
    kind: str


def symmetry_data(kind: str, k_point: str = "K") -> SymmetryData:
    """B and rho vectors for the given lattice kind and high-symmetry point.

    kappa-form duals (kind "Lambda"): B = [[0,-1],[1,-1]], rho_1 = (0,1),
    rho_{-1} = (-1,0).  nu-form duals (kind "LambdaStar"): B = [[-1,-1],[1,0]],
    rho_1 = (-1,0), rho_{-1} = (0,-1).  At K' both rho vectors are negated.
    """
    if kind == DIRECT:
        B = np.array([[0, -1], [1, -1]], dtype=np.int64)
        rp = np.array([0, 1], dtype=np.int64)
        rm = np.array([-1, 0], dtype=np.int64)
    elif kind == DUAL:
        B = np.array([[-1, -1], [1, 0]], dtype=np.int64)
        rp = np.array([-1, 0], dtype=np.int64)
        rm = np.array([0, -1], dtype=np.int64)
    else:
        raise ValueError("unknown lattice kind %r" % kind)
    if k_point == "Kprime":
        rp, rm = -rp, -rm
    elif k_point != "K":
        raise ValueError("k_point must be 'K' or 'Kprime'")
    return SymmetryData(B, rp, rm, k_point, kind)


def high_symmetry_points(basis: HoneycombBasis) -> tuple[np.ndarray, np.ndarray]:
    """The rotation-invariant quasimomenta K and K' = -K of the lattice."""
    if basis.kind == DIRECT:
        K = basis.dual_matrix @ np.array([1.0, -1.0]) / 3.0
    else:
        K = basis.dual_matrix @ np.array([1.0, 1.0]) / 3.0
    return K, -K


def rotate_index(sym: SymmetryData, m, power: int = 1) -> np.ndarray:
    """Apply m -> B m + rho_1 the given number of times (power mod 3)."""
    out = np.asarray(m, dtype=np.int64)
    for _ in range(power % 3):
        out = sym.B @ out + sym.rho_plus
    return out


def index_orbit(sym: SymmetryData, m) -> list[tuple[int, int]]:
    """The (size <= 3) affine orbit of the index m."""
    m0 = tuple(int(x) for x in np.asarray(m))
    orbit = [m0]
    cur = np.asarray(m, dtype=np.int64)
    for _ in range(2):
        cur = sym.B @ cur + sym.rho_plus
        t = (int(cur[0]), int(cur[1]))
        if t not in orbit:
            orbit.append(t)
    return orbit


@dataclass(frozen=True)
class OrbitSet:
    """Representatives of plane-wave index orbits within a reciprocal-space cutoff."""

    representatives: tuple
    cutoff_radius: float


def lattice_points_in_disk(matrix: np.ndarray, center: np.ndarray, radius: float) -> np.ndarray:
    """Integer vectors m with |center + matrix m| <= radius (+ tolerance).

    Bounding box from the inverse matrix; exact filtering afterwards.
    """
    inv = np.linalg.inv(matrix)
    # image of the disk of radius (radius + |center|) under inv
    bound = (radius + float(np.linalg.norm(center))) * np.abs(inv).sum(axis=1).max() + 1.0
    n = int(math.ceil(bound))
    rng = np.arange(-n, n + 1)
    mm = np.array(np.meshgrid(rng, rng)).reshape(2, -1).T
    pts = center[None, :] + mm @ matrix.T
    keep = np.einsum("ij,ij->i", pts, pts) <= (radius + GEOM_TOL) ** 2
    return mm[keep].astype(np.int64)


def orbit_representatives(sym: SymmetryData, basis: HoneycombBasis, K: np.ndarray,
                          cutoff: float) -> OrbitSet:
    """Partition {m : |K + dual m| <= cutoff} into affine rotation orbits.

    Representatives are the lexicographically smallest orbit members.  The
    affine action is an isometry of the shifted lattice K + dual Z^2, so each
    orbit lies entirely inside or outside the disk and the partition is exact.
    """
    pts = lattice_points_in_disk(basis.dual_matrix, np.asarray(K, dtype=float), cutoff)
    pool = {(int(p[0]), int(p[1])) for p in pts}
    reps = []
    seen = set()
    for m in sorted(pool):
        if m in seen:
            continue
        orbit = index_orbit(sym, m)
        seen.update(orbit)
        # the orbit through 0 is anchored at 0 (the perturbation formulas
        # expand around the coefficient at the origin); others take the
        # lexicographically smallest member
        reps.append((0, 0) if (0, 0) in orbit else min(orbit))
    return OrbitSet(tuple(sorted(reps)), float(cutoff))


def _egcd(x: int, y: int) -> tuple[int, int, int]:
    """Extended Euclid: returns (g, s, t) with s x + t y = g = gcd(x, y)."""
    s0, s1, t0, t1, r0, r1 = 1, 0, 0, 1, x, y
    while r1:
        q = r0 // r1
        r0, r1 = r1, r0 - q * r1
        s0, s1 = s1, s0 - q * s1
        t0, t1 = t1, t0 - q * t1
    return r0, s0, t0


def bezout_shift_decomposition(data: CommensurationData) -> tuple[np.ndarray, np.ndarray]:
    """Integer vectors v_plus, v_minus with NA_plus v_plus + NA_minus v_minus = rho_minus.

    Follows the two-case Bezout construction: pick (p~, q~) with
    a p~ + b q~ = 1, set q = q~ + a (p~ + q~), p = p~ - b (p~ + q~); in the
    kappa case additionally pick (m, n) with 3 m + a n = 1.  Bezout pairs are
    only unique up to (p~, q~) -> (p~ + t b, q~ - t a); the shift t is scanned
    so that the parity divisions come out exact.
    """
    a, b, eps = data.a, data.b, data.epsilon
    cm = coupling_matrices(data)
    sym = symmetry_data(data.superlattice_kind)
    rho_m = sym.rho_minus

    g, pt0, qt0 = _egcd(a, b)
    assert g == 1
    scale = 2 ** eps
    for t in range(-6, 7):
        pt, qt = pt0 + t * b, qt0 - t * a
        s = pt + qt
        q = qt + a * s
        p = pt - b * s
        if data.rho_flag == 0:
            g3, mcoef, ncoef = _egcd(3, a)
            assert g3 == 1
            num1 = -(p + q * (4 * mcoef - 1))
            num2 = q * (4 * mcoef - 1) - p
            if (scale * num1) % 2 or (scale * num2) % 2:
                continue
            v_plus = np.array([scale * num1 // 2, scale * (ncoef * q * b - mcoef * q)],
                              dtype=np.int64)
            v_minus = np.array([scale * num2 // 2, scale * (mcoef * q + ncoef * q * b)],
                               dtype=np.int64)
        else:
            if (scale * (q - p)) % 2 or (scale * (p + q)) % 2:
                continue
            v_plus = np.array([scale * (q - p) // 2, -scale * p], dtype=np.int64)
            v_minus = np.array([-scale * (p + q) // 2, -scale * p], dtype=np.int64)
        if np.array_equal(cm.NA_plus @ v_plus + cm.NA_minus @ v_minus, rho_m):
            return v_plus, v_minus
    raise ArithmeticError("Bezout construction failed for (a, b) = (%d, %d)" % (a, b))


def brute_force_intersection(data: CommensurationData, radius: float) -> np.ndarray:
    """Points of R_theta Lambda intersect R_{-theta} Lambda in the disk |x| <= radius.

    Oracle for the superlattice identity.  A point x = R_theta nu m lies in
    R_{-theta} Lambda iff nu^{-1} R_theta x is an integer vector; membership is
    tested by nearest-lattice-vector rounding at tolerance 1e-9.
    """
    sup = superlattice_basis(data)
    shortest = float(np.linalg.norm(sup.basis_matrix, axis=0).min())
    if radius > 5.0 * shortest + GEOM_TOL:
        raise ValueError("radius %.3g exceeds the 5-superlattice-cell runtime guard" % radius)
    R = rotation_matrix(data)
    mm = lattice_points_in_disk(R @ NU, np.zeros(2), radius)
    pts = mm @ (R @ NU).T
    # x in R_{-theta} Lambda  <=>  nu^{-1} R_theta x in Z^2
    coords = (np.linalg.inv(NU) @ R @ pts.T).T
    keep = np.abs(coords - np.round(coords)).max(axis=1) < GEOM_TOL
    out = pts[keep]
    order = np.lexsort((out[:, 1], out[:, 0]))
    return out[order]


def angle_table(a_max: int) -> list[dict]:
    """Classified records for all coprime (a, b), 0 < b < a <= a_max, sorted by theta."""
    if a_max < 2:
        raise ValueError("a_max must be at least 2")
    rows = []
    for a in range(2, a_max + 1):
        for b in range(1, a):
            if math.gcd(a, b) != 1:
                continue
            d = classify_angle(a, b)
            rows.append({
                "a": d.a, "b": d.b, "theta_rad": d.theta, "epsilon": d.epsilon,
                "rho_flag": d.rho_flag, "alpha_class": d.alpha_class, "N": d.N,
                "superlattice": d.superlattice_kind,
            })
    rows.sort(key=lambda r: r["theta_rad"])
    return rows


def coprime_pairs(a_max: int) -> list[tuple[int, int]]:
    """All coprime (a, b) with 0 < b < a <= a_max."""
    return [(a, b) for a in range(2, a_max + 1) for b in range(1, a)
            if math.gcd(a, b) == 1]


def write_angle_table(path: str, a_max: int) -> None:
    with open(path, "w") as fh:
        json.dump(angle_table(a_max), fh, indent=1)
        fh.write("\n")
