"""Sparse Fourier-space honeycomb potentials and their twisted combinations.

A potential periodic under a lattice with dual matrix kappa~ is stored as a
sparse map m -> U_m with U(x) = sum_m U_m exp(i <kappa~ m, x>).  Real
potentials satisfy U_{-m} = conj(U_m); honeycomb potentials additionally have
U_{B m} = U_m with every U_m real.

Twisting places the single-layer coefficients onto the superlattice grid via
the integer coupling matrices N A_{+-1}: the additive AA combination
W = (V(R_theta x) + V(R_{-theta} x)) / 2 gains V_p / 2 at the indices
N A_{+1} p and N A_{-1} p.  AB stacking multiplies each placement by an
average of shift phases over the rotation orbit of the corner point K0, and
the pointwise-product combiner convolves the two rotated coefficient maps.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import lattice as lat

ZERO_TOL = 1e-14

K0 = np.array([1.0 / math.sqrt(3.0), 0.0])


@dataclass
class FourierPotential:
    lattice: lat.HoneycombBasis
    coefficients: dict
    honeycomb: bool = False
    decay_note: Optional[float] = None

    def get(self, m) -> complex:
        return self.coefficients.get((int(m[0]), int(m[1])), 0.0 + 0.0j)

    def modes(self):
        return sorted(self.coefficients)

    def __len__(self):
        return len(self.coefficients)


@dataclass(frozen=True)
class TwistSpec:
    data: lat.CommensurationData
    stacking: str = "AA"
    combiner: str = "Additive"
    amplitude: float = 1.0

    def __post_init__(self):
        if self.stacking not in ("AA", "AB"):
            raise ValueError("stacking must be 'AA' or 'AB'")
        if self.combiner not in ("Additive", "PointwiseProduct"):
            raise ValueError("combiner must be 'Additive' or 'PointwiseProduct'")


def build_cosine_family(orbit_coeffs, sign: int = 1,
                        lattice: Optional[lat.HoneycombBasis] = None) -> FourierPotential:
    """Honeycomb cosine potential V(x) = sign * sum_m a_m sum_l cos(<kappa B^l m, x>).

    Args:
        orbit_coeffs: list of (m, a_m) with integer 2-vectors m pairwise
            inequivalent under the linear B action (and negation) and a_m > 0.
        sign: +1 or -1, the overall sign of the family.
        lattice: lattice of periodicity, unit Lambda by default.

    Each cosine contributes coefficients sign * a_m / 2 at the six modes
    +- B^l m, so the result is real, even, and B-invariant by construction.
    """
    if sign not in (1, -1):
        raise ValueError("sign must be +1 or -1")
    if lattice is None:
        lattice = lat.unit_lattice()
    sym = lat.symmetry_data(lattice.kind)
    coeffs: dict = {}
    for m, a_m in orbit_coeffs:
        if not a_m > 0:
            raise ValueError("cosine amplitudes must be positive; got %r" % (a_m,))
        m = np.asarray(m, dtype=np.int64)
        if not np.any(m):
            raise ValueError("the zero mode cannot seed a cosine orbit")
        orbit = []
        cur = m.copy()
        for _ in range(3):
            orbit.append((int(cur[0]), int(cur[1])))
            orbit.append((-int(cur[0]), -int(cur[1])))
            cur = sym.B @ cur
        for t in set(orbit):
            if t in coeffs:
                raise ValueError("mode %r duplicates an earlier cosine orbit" % (t,))
            coeffs[t] = complex(sign * a_m / 2.0)
    return FourierPotential(lattice, coeffs, honeycomb=True)


@dataclass(frozen=True)
class HoneycombReport:
    reality_ok: bool
    evenness_ok: bool
    b_invariant_ok: bool
    violations: tuple

    @property
    def ok(self) -> bool:
        return self.reality_ok and self.evenness_ok and self.b_invariant_ok


def validate_honeycomb(pot: FourierPotential, tol: float = 1e-12) -> HoneycombReport:
    """Check reality, evenness (real coefficients), and B-invariance mode by mode."""
    sym = lat.symmetry_data(pot.lattice.kind)
    bad = []
    reality = evenness = b_inv = True
    for m, c in pot.coefficients.items():
        neg = (-m[0], -m[1])
        if abs(pot.coefficients.get(neg, 0.0) - np.conj(c)) > tol:
            reality = False
            bad.append(("reality", m))
        if abs(c.imag) > tol:
            evenness = False
            bad.append(("evenness", m))
        bm = sym.B @ np.array(m, dtype=np.int64)
        if abs(pot.coefficients.get((int(bm[0]), int(bm[1])), 0.0) - c) > tol:
            b_inv = False
            bad.append(("B-invariance", m))
    return HoneycombReport(reality, evenness, b_inv, tuple(sorted(bad)))


def _phase_weights(data: lat.CommensurationData, stacking: str,
                   theta_sign: int) -> tuple:
    """Per-layer mode weights (functions of the integer index p) for one twist.

    Layer +1 carries the rotation R_{+theta} and shift -K0-average; layer -1
    the opposite.  AA has no shift, so both weights are the constant 1/2.
    """
    if stacking == "AA":
        return (lambda p: 0.5), (lambda p: 0.5)
    R = lat.rotation_matrix(data)
    if theta_sign < 0:
        R = R.T
    shifts = [np.linalg.matrix_power(lat.ROT3, j % 3) @ (0.5 * K0) for j in (-1, 0, 1)]

    def w_plus(p):
        q = R @ (lat.KAPPA @ p)
        return sum(np.exp(1j * q @ s) for s in shifts) / 6.0

    def w_minus(p):
        q = R.T @ (lat.KAPPA @ p)
        return sum(np.exp(-1j * q @ s) for s in shifts) / 6.0

    return w_plus, w_minus


def twist(pot: FourierPotential, spec: TwistSpec, negate_theta: bool = False,
          product_cutoff: Optional[float] = None) -> FourierPotential:
    """Combine two rotated copies of a honeycomb potential on the superlattice.

    Additive: output coefficient at N A_{+1} p gains w_+(p) V_p and at
    N A_{-1} p gains w_-(p) V_p, with the AA weight 1/2 or the AB phase
    average (1/6) sum_j exp(+-i <R_{+-theta} kappa p, R^j K0 / 2>).  The phase
    sign follows the convention T_a f(x) = f(x - a), under which a shift by a
    multiplies the mode at q by exp(-i <q, a>).

    PointwiseProduct: discrete convolution of the two per-layer coefficient
    maps; modes with |dual m| > product_cutoff are dropped when a cutoff is
    given.

    negate_theta builds the -theta twin (layers swap roles), used to test the
    F* symmetry of AB stacking.
    """
    report = validate_honeycomb(pot)
    if not report.ok:
        raise ValueError("input potential is not honeycomb: %r" % (report.violations[:3],))
    if pot.lattice.kind != lat.DIRECT:
        raise ValueError("twisting is defined for potentials on the unit lattice")

    data = spec.data
    cm = lat.coupling_matrices(data)
    sup = lat.superlattice_basis(data)
    NA_p, NA_m = cm.NA_plus, cm.NA_minus
    theta_sign = -1 if negate_theta else 1
    if negate_theta:
        NA_p, NA_m = NA_m, NA_p
    w_plus, w_minus = _phase_weights(data, spec.stacking, theta_sign)

    layer_plus: dict = {}
    layer_minus: dict = {}
    for m, c in pot.coefficients.items():
        p = np.array(m, dtype=np.int64)
        ip = tuple(int(x) for x in NA_p @ p)
        im = tuple(int(x) for x in NA_m @ p)
        layer_plus[ip] = layer_plus.get(ip, 0.0) + w_plus(p) * c
        layer_minus[im] = layer_minus.get(im, 0.0) + w_minus(p) * c

    out: dict = {}
    if spec.combiner == "Additive":
        for layer in (layer_plus, layer_minus):
            for idx, c in layer.items():
                out[idx] = out.get(idx, 0.0) + c
    else:
        for i1, c1 in layer_plus.items():
            for i2, c2 in layer_minus.items():
                idx = (i1[0] + i2[0], i1[1] + i2[1])
                out[idx] = out.get(idx, 0.0) + 2.0 * c1 * 2.0 * c2
        if product_cutoff is not None:
            out = {m: c for m, c in out.items()
                   if np.linalg.norm(sup.dual_matrix @ np.array(m)) <= product_cutoff}

    out = {m: complex(c) for m, c in out.items() if abs(c) > ZERO_TOL}
    W = FourierPotential(sup, out, honeycomb=False, decay_note=pot.decay_note)
    W.honeycomb = validate_honeycomb(W).ok
    return W


def _exact_member(m, M: np.ndarray) -> bool:
    """Whether the integer vector m lies in M Z^2 (adjugate test, exact)."""
    det = int(M[0, 0]) * int(M[1, 1]) - int(M[0, 1]) * int(M[1, 0])
    adj = np.array([[M[1, 1], -M[0, 1]], [-M[1, 0], M[0, 0]]], dtype=np.int64)
    v = adj @ np.asarray(m, dtype=np.int64)
    return int(v[0]) % det == 0 and int(v[1]) % det == 0


def support_check(W: FourierPotential, cm: lat.CouplingMatrices):
    """Verify supp W is contained in N A_{+1} Z^2 union N A_{-1} Z^2."""
    offending = [m for m in W.modes()
                 if not (_exact_member(m, cm.NA_plus) or _exact_member(m, cm.NA_minus))]
    return len(offending) == 0, offending


class ZeroPatternError(ValueError):
    """No orbit member satisfies the zero condition U_{m - rho_1} = 0."""

    def __init__(self, orbit):
        self.orbit = tuple(orbit)
        super().__init__("no member of orbit %r has a vanishing shifted coefficient"
                         % (self.orbit,))


def choose_S_with_zero_pattern(W: FourierPotential, sym: lat.SymmetryData,
                               orbits: lat.OrbitSet) -> lat.OrbitSet:
    """Re-select orbit representatives m so that U_{m - rho_1} = 0.

    The orbit through 0 must keep the representative 0 (the expansion is
    anchored there); if its shifted coefficient does not vanish the caller
    should use the first-order condition instead.  Raises ZeroPatternError
    naming the first orbit on which the selection is impossible.
    """
    reps = []
    for rep in orbits.representatives:
        orbit = lat.index_orbit(sym, rep)
        if (0, 0) in orbit:
            shifted = (-int(sym.rho_plus[0]), -int(sym.rho_plus[1]))
            if abs(W.coefficients.get(shifted, 0.0)) > ZERO_TOL:
                raise ZeroPatternError(orbit)
            reps.append((0, 0))
            continue
        good = [m for m in orbit
                if abs(W.coefficients.get((m[0] - int(sym.rho_plus[0]),
                                           m[1] - int(sym.rho_plus[1])), 0.0)) <= ZERO_TOL]
        if not good:
            raise ZeroPatternError(orbit)
        reps.append(min(good))
    return lat.OrbitSet(tuple(sorted(reps)), orbits.cutoff_radius)


def fw_condition(W: FourierPotential, sym: lat.SymmetryData) -> complex:
    """The coefficient W_{-rho_{-1}}, whose nonvanishing is the first-order condition."""
    return W.get((-int(sym.rho_minus[0]), -int(sym.rho_minus[1])))


class DegenerateDenominatorError(ArithmeticError):
    def __init__(self, m):
        self.m = tuple(m)
        super().__init__("|K*(m)| = |K*| for m = %r" % (self.m,))


@dataclass(frozen=True)
class SecondOrderSum:
    value: complex
    summands: tuple
    tail_bound: float
    inconclusive: bool


def second_order_sum(W: FourierPotential, sym: lat.SymmetryData, S: lat.OrbitSet,
                     K_star: np.ndarray, dual: np.ndarray) -> SecondOrderSum:
    """sum over S \\ {0} of W_m W_{m - rho_{-1}} / (|K*|^2 - |K*(m)|^2).

    The truncation tail is bounded through the gradient-norm proxy
    |W_m| <= (sum |W_n| |dual n|) / |K*(m)| applied to every stored mode whose
    orbit falls outside S; the flag marks an identically zero sum (every
    product vanishes), in which case the criterion is inconclusive.
    """
    K_star = np.asarray(K_star, dtype=float)
    k2 = float(K_star @ K_star)
    rm = sym.rho_minus
    summands = []
    covered = set()
    for m in S.representatives:
        covered.update(lat.index_orbit(sym, m))
        if m == (0, 0):
            continue
        Km = K_star + dual @ np.array(m, dtype=float)
        den = k2 - float(Km @ Km)
        if abs(den) < 1e-10:
            raise DegenerateDenominatorError(m)
        num = W.get(m) * W.get((m[0] - int(rm[0]), m[1] - int(rm[1])))
        summands.append(num / den)
    value = complex(np.sum(summands)) if summands else 0.0 + 0.0j

    grad_proxy = sum(abs(c) * np.linalg.norm(dual @ np.array(m, dtype=float))
                     for m, c in W.coefficients.items())
    tail = 0.0
    for m, c in W.coefficients.items():
        if m in covered:
            continue
        Km = K_star + dual @ np.array(m, dtype=float)
        den = abs(k2 - float(Km @ Km))
        if den < 1e-10:
            raise DegenerateDenominatorError(m)
        partner = min(grad_proxy / max(np.linalg.norm(Km), 1e-30), grad_proxy)
        tail += abs(c) * partner / den

    inconclusive = all(abs(s) <= ZERO_TOL for s in summands)
    return SecondOrderSum(value, tuple(summands), float(tail), inconclusive)


# --- file formats ---------------------------------------------------------

def load_potential_spec(path: str):
    """Read a potential file {"lattice": "Lambda", "sign": "+", "orbits": [...]}.

    Returns (orbit_coeffs, sign) ready for build_cosine_family.
    """
    with open(path) as fh:
        doc = json.load(fh)
    if doc.get("lattice", "Lambda") != "Lambda":
        raise ValueError("only unit-Lambda potential files are supported")
    sign = {"+": 1, "-": -1}[doc.get("sign", "+")]
    orbit_coeffs = [((int(o["m"][0]), int(o["m"][1])), float(o["a"]))
                    for o in doc["orbits"]]
    return orbit_coeffs, sign


def save_potential_spec(path: str, orbit_coeffs, sign: int = 1) -> None:
    doc = {"lattice": "Lambda", "sign": "+" if sign > 0 else "-",
           "orbits": [{"m": [int(m[0]), int(m[1])], "a": float(a)}
                      for m, a in orbit_coeffs]}
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=1)
        fh.write("\n")


def save_twisted(path: str, W: FourierPotential, data: lat.CommensurationData,
                 stacking: str) -> None:
    """Twisted-potential dump with modes sorted lexicographically (byte stable)."""
    modes = [{"m": [int(m[0]), int(m[1])], "re": float(W.coefficients[m].real),
              "im": float(W.coefficients[m].imag)} for m in W.modes()]
    doc = {"a": data.a, "b": data.b, "stacking": stacking, "modes": modes}
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=1)
        fh.write("\n")


def load_twisted(path: str) -> tuple:
    """Inverse of save_twisted; returns (FourierPotential, CommensurationData, stacking)."""
    with open(path) as fh:
        doc = json.load(fh)
    data = lat.classify_angle(int(doc["a"]), int(doc["b"]))
    sup = lat.superlattice_basis(data)
    coeffs = {(int(m["m"][0]), int(m["m"][1])): complex(m["re"], m["im"])
              for m in doc["modes"]}
    W = FourierPotential(sup, coeffs)
    W.honeycomb = validate_honeycomb(W).ok
    return W, data, doc["stacking"]


def sample_real_space(pot: FourierPotential, n: int) -> np.ndarray:
    """Evaluate the potential on an n x n fractional grid of its unit cell."""
    frac = np.arange(n) / float(n)
    out = np.zeros((n, n), dtype=complex)
    ii, jj = np.meshgrid(frac, frac, indexing="ij")
    for m, c in pot.coefficients.items():
        # <dual m, basis (s, t)> = 2 pi (m1 s + m2 t) by duality
        out += c * np.exp(2j * math.pi * (m[0] * ii + m[1] * jj))
    return out


def coefficients_from_samples(samples: np.ndarray) -> dict:
    """Inverse of sample_real_space via FFT; returns a centered sparse map."""
    n = samples.shape[0]
    F = np.fft.fft2(samples) / (n * n)
    out = {}
    for i in range(n):
        for j in range(n):
            if abs(F[i, j]) > 1e-12:
                mi = i if i <= n // 2 else i - n
                mj = j if j <= n // 2 else j - n
                out[(mi, mj)] = complex(F[i, j])
    return out
