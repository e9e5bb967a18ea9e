import math

import numpy as np
import pytest

from twistbands import lattice as lat
from twistbands import potential as pot


def eval_potential(p, xs):
    """Direct real-space evaluation at points xs (n x 2)."""
    xs = np.atleast_2d(xs)
    out = np.zeros(len(xs), dtype=complex)
    for m, c in p.coefficients.items():
        q = p.lattice.dual_matrix @ np.array(m, dtype=float)
        out += c * np.exp(1j * xs @ q)
    return out


def reference_potential():
    return pot.build_cosine_family([((1, 0), 1.0)], sign=1)


SAMPLE_XS = np.array([[0.0, 0.0], [0.3, 0.7], [-1.2, 0.4], [2.1, -0.6], [0.05, 3.3]])


class TestCosineFamily:
    def test_single_orbit(self):
        p = reference_potential()
        assert len(p) == 6
        assert all(c == 0.5 for c in p.coefficients.values())
        assert p.honeycomb

    def test_b_invariance(self):
        p = reference_potential()
        sym = lat.symmetry_data(p.lattice.kind)
        b10 = tuple(sym.B @ np.array([1, 0]))
        assert p.get(b10) == p.get((1, 0)) == 0.5

    def test_two_orbits_negative_sign(self):
        p = pot.build_cosine_family([((1, 0), 1.0), ((2, 1), 0.25)], sign=-1)
        assert len(p) == 12
        vals = sorted({c.real for c in p.coefficients.values()})
        assert vals == [-0.5, -0.125]

    def test_rejects_duplicates_and_nonpositive(self):
        with pytest.raises(ValueError):
            pot.build_cosine_family([((1, 0), 1.0), ((0, 1), 0.5)])
        with pytest.raises(ValueError):
            pot.build_cosine_family([((1, 0), -1.0)])

    def test_real_space_is_cosine_sum(self):
        p = reference_potential()
        sym = lat.symmetry_data(p.lattice.kind)
        vals = eval_potential(p, SAMPLE_XS)
        direct = np.zeros(len(SAMPLE_XS))
        m = np.array([1, 0])
        for _ in range(3):
            q = lat.KAPPA @ m
            direct += np.cos(SAMPLE_XS @ q)
            m = sym.B @ m
        assert np.abs(vals - direct).max() < 1e-12


class TestValidateHoneycomb:
    def test_family_passes(self):
        assert pot.validate_honeycomb(reference_potential()).ok

    def test_reality_violation(self):
        p = pot.FourierPotential(lat.unit_lattice(), {(1, 0): 1.0 + 0j})
        rep = pot.validate_honeycomb(p)
        assert not rep.reality_ok
        assert ("reality", (1, 0)) in rep.violations

    def test_b_violation(self):
        p = pot.FourierPotential(
            lat.unit_lattice(),
            {(1, 0): 1.0 + 0j, (-1, 0): 1.0 + 0j})
        rep = pot.validate_honeycomb(p)
        assert not rep.b_invariant_ok
        assert any(k == "B-invariance" for k, _ in rep.violations)


class TestTwistAdditiveAA:
    def setup_method(self):
        self.data = lat.classify_angle(2, 1)
        self.spec = pot.TwistSpec(self.data, "AA", "Additive")
        self.W = pot.twist(reference_potential(), self.spec)

    def test_mode_count_and_values(self):
        assert len(self.W) == 12
        for c in self.W.coefficients.values():
            assert c == pytest.approx(0.25)

    def test_even_real(self):
        for m, c in self.W.coefficients.items():
            assert abs(c.imag) < 1e-14
            assert self.W.get((-m[0], -m[1])) == pytest.approx(c)

    def test_b_invariant_on_superlattice(self):
        sym = lat.symmetry_data(self.W.lattice.kind)
        for m, c in self.W.coefficients.items():
            bm = tuple(sym.B @ np.array(m))
            assert abs(self.W.get(bm) - c) < 1e-12

    def test_real_space_oracle(self):
        # W(x) = (V(R x) + V(R^T x)) / 2 pointwise
        V = reference_potential()
        R = lat.rotation_matrix(self.data)
        lhs = eval_potential(self.W, SAMPLE_XS)
        rhs = 0.5 * (eval_potential(V, SAMPLE_XS @ R.T) + eval_potential(V, SAMPLE_XS @ R))
        assert np.abs(lhs - rhs).max() < 1e-12

    def test_support_radius_is_layer_radius(self):
        # twisted modes sit at rotated copies of the layer modes, same length
        r0 = np.linalg.norm(lat.KAPPA @ np.array([1, 0]))
        for m in self.W.modes():
            r = np.linalg.norm(self.W.lattice.dual_matrix @ np.array(m, dtype=float))
            assert r == pytest.approx(r0, abs=1e-9)


class TestTwistAB:
    def test_f_star_symmetry(self):
        # W^{-theta}_{-m} = W^theta_m
        data = lat.classify_angle(2, 1)
        V = reference_potential()
        spec = pot.TwistSpec(data, "AB", "Additive")
        Wp = pot.twist(V, spec)
        Wm = pot.twist(V, spec, negate_theta=True)
        assert set(Wp.modes()) == {(-a, -b) for a, b in Wm.modes()}
        for m, c in Wp.coefficients.items():
            assert abs(Wm.get((-m[0], -m[1])) - c) < 1e-12

    def test_reality(self):
        data = lat.classify_angle(2, 1)
        W = pot.twist(reference_potential(), pot.TwistSpec(data, "AB", "Additive"))
        for m, c in W.coefficients.items():
            assert abs(np.conj(W.get((-m[0], -m[1]))) - c) < 1e-12

    def test_real_space_oracle(self):
        # AB is the orbit average of shifted layers, checked pointwise
        data = lat.classify_angle(3, 1)
        V = reference_potential()
        W = pot.twist(V, pot.TwistSpec(data, "AB", "Additive"))
        R = lat.rotation_matrix(data)
        shifts = [np.linalg.matrix_power(lat.ROT3, j % 3) @ (0.5 * pot.K0)
                  for j in (-1, 0, 1)]
        lhs = eval_potential(W, SAMPLE_XS)
        rhs = np.zeros(len(SAMPLE_XS), dtype=complex)
        for s in shifts:
            rhs += eval_potential(V, (SAMPLE_XS - s[None, :]) @ R.T) / 6.0
            rhs += eval_potential(V, (SAMPLE_XS + s[None, :]) @ R) / 6.0
        assert np.abs(lhs - rhs).max() < 1e-12


class TestPointwiseProduct:
    def test_real_space_oracle(self):
        data = lat.classify_angle(2, 1)
        V = reference_potential()
        W = pot.twist(V, pot.TwistSpec(data, "AA", "PointwiseProduct"))
        R = lat.rotation_matrix(data)
        lhs = eval_potential(W, SAMPLE_XS)
        rhs = eval_potential(V, SAMPLE_XS @ R.T) * eval_potential(V, SAMPLE_XS @ R)
        assert np.abs(lhs - rhs).max() < 1e-10

    def test_cutoff_drops_far_modes(self):
        data = lat.classify_angle(2, 1)
        V = reference_potential()
        cutoff = 1.5 * np.linalg.norm(lat.KAPPA[:, 0])
        W = pot.twist(V, pot.TwistSpec(data, "AA", "PointwiseProduct"),
                      product_cutoff=cutoff)
        for m in W.modes():
            r = np.linalg.norm(W.lattice.dual_matrix @ np.array(m, dtype=float))
            assert r <= cutoff + 1e-9


class TestSupportCheck:
    def test_twist_passes_all_pairs(self):
        V = reference_potential()
        for a, b in lat.coprime_pairs(7):
            data = lat.classify_angle(a, b)
            W = pot.twist(V, pot.TwistSpec(data, "AA", "Additive"))
            cm = lat.coupling_matrices(data)
            ok, off = pot.support_check(W, cm)
            assert ok, (a, b, off)

    def test_rho_not_in_support(self):
        # holds for theta below pi/6 (and empirically well beyond), where the
        # coupling matrices are not unimodular
        for a, b in [(2, 1), (5, 3), (6, 1), (9, 2)]:
            data = lat.classify_angle(a, b)
            W = pot.twist(reference_potential(), pot.TwistSpec(data, "AA", "Additive"))
            sym = lat.symmetry_data(data.superlattice_kind)
            cm = lat.coupling_matrices(data)
            for v in [sym.rho_plus, sym.rho_minus, sym.rho_plus - sym.rho_minus]:
                t = (int(v[0]), int(v[1]))
                assert abs(W.get(t)) < 1e-14
                ok, off = pot.support_check(
                    pot.FourierPotential(W.lattice, {t: 1.0}), cm)
                assert not ok

    def test_pi_over_6_is_the_exception(self):
        # at theta = pi/6 the coupling matrices are unimodular, so every
        # superlattice index (the rho vectors included) carries a twisted mode
        data = lat.classify_angle(3, 1)
        W = pot.twist(reference_potential(), pot.TwistSpec(data, "AA", "Additive"))
        sym = lat.symmetry_data(data.superlattice_kind)
        assert abs(W.get(tuple(int(x) for x in sym.rho_plus))) > 0.1

    def test_injected_mode_fails(self):
        data = lat.classify_angle(2, 1)
        W = pot.twist(reference_potential(), pot.TwistSpec(data, "AA", "Additive"))
        sym = lat.symmetry_data(data.superlattice_kind)
        bad = dict(W.coefficients)
        bad[tuple(int(x) for x in sym.rho_plus)] = 1.0
        ok, off = pot.support_check(pot.FourierPotential(W.lattice, bad),
                                    lat.coupling_matrices(data))
        assert not ok and tuple(sym.rho_plus) in off

    def test_empty_passes(self):
        data = lat.classify_angle(2, 1)
        ok, off = pot.support_check(
            pot.FourierPotential(lat.superlattice_basis(data), {}),
            lat.coupling_matrices(data))
        assert ok and off == []


def eight_shell_orbits(data):
    sup = lat.superlattice_basis(data)
    sym = lat.symmetry_data(sup.kind)
    K, _ = lat.high_symmetry_points(sup)
    cutoff = 8.0 * np.linalg.norm(sup.dual_matrix[:, 0])
    return sym, sup, K, lat.orbit_representatives(sym, sup, K, cutoff)


class TestChooseS:
    def test_twisted_potentials_succeed(self):
        V = reference_potential()
        for a, b in [(2, 1), (5, 1), (5, 3), (6, 1)]:
            data = lat.classify_angle(a, b)
            W = pot.twist(V, pot.TwistSpec(data, "AA", "Additive"))
            sym, sup, K, orbits = eight_shell_orbits(data)
            S = pot.choose_S_with_zero_pattern(W, sym, orbits)
            rp = sym.rho_plus
            for m in S.representatives:
                if m == (0, 0):
                    continue
                assert abs(W.get((m[0] - int(rp[0]), m[1] - int(rp[1])))) < 1e-14
            assert (0, 0) in S.representatives

    def test_pi_over_6_falls_back_to_first_order(self):
        # the zero-pattern selection is impossible at theta = pi/6, and the
        # first-order coefficient at -rho_{-1} is nonzero there instead
        data = lat.classify_angle(3, 1)
        W = pot.twist(reference_potential(), pot.TwistSpec(data, "AA", "Additive"))
        sym, sup, K, orbits = eight_shell_orbits(data)
        with pytest.raises(pot.ZeroPatternError):
            pot.choose_S_with_zero_pattern(W, sym, orbits)
        assert abs(pot.fw_condition(W, sym)) > 0.1

    def test_adversarial_dense_fails_with_orbit(self):
        data = lat.classify_angle(2, 1)
        sym, sup, K, orbits = eight_shell_orbits(data)
        dense = pot.FourierPotential(
            sup, {(i, j): 1.0 + 0j for i in range(-12, 13) for j in range(-12, 13)})
        with pytest.raises(pot.ZeroPatternError) as exc:
            pot.choose_S_with_zero_pattern(dense, sym, orbits)
        assert len(exc.value.orbit) >= 1

    def test_single_layer_cosine_takes_fw_path(self):
        # untwisted potential containing -rho_{-1}: the first-order condition holds
        basis = lat.unit_lattice()
        sym = lat.symmetry_data(basis.kind)
        m0 = tuple(int(x) for x in -sym.rho_minus)
        p = pot.build_cosine_family([(m0, 0.7)])
        assert abs(pot.fw_condition(p, sym) - 0.35) < 1e-14


class TestFWCondition:
    def test_twisted_vanishes(self):
        data = lat.classify_angle(2, 1)
        W = pot.twist(reference_potential(), pot.TwistSpec(data, "AA", "Additive"))
        sym = lat.symmetry_data(data.superlattice_kind)
        assert pot.fw_condition(W, sym) == 0.0

    def test_empty(self):
        p = pot.FourierPotential(lat.unit_lattice(), {})
        sym = lat.symmetry_data(lat.DIRECT)
        assert pot.fw_condition(p, sym) == 0.0


class TestSecondOrderSum:
    def test_reference_sign_negative(self):
        data = lat.classify_angle(2, 1)
        W = pot.twist(reference_potential(), pot.TwistSpec(data, "AA", "Additive"))
        sym, sup, K, orbits = eight_shell_orbits(data)
        S = pot.choose_S_with_zero_pattern(W, sym, orbits)
        res = pot.second_order_sum(W, sym, S, K, sup.dual_matrix)
        assert res.value.real < 0
        assert abs(res.value.imag) < 1e-14
        assert not res.inconclusive
        nonzero = [s for s in res.summands if abs(s) > 1e-14]
        assert nonzero and all(s.real < 0 for s in nonzero)

    def test_empty_is_zero(self):
        data = lat.classify_angle(2, 1)
        sym, sup, K, orbits = eight_shell_orbits(data)
        W = pot.FourierPotential(sup, {})
        res = pot.second_order_sum(W, sym, orbits, K, sup.dual_matrix)
        assert res.value == 0.0
        assert res.inconclusive

    def test_orthogonal_support_inconclusive(self):
        data = lat.classify_angle(2, 1)
        sym, sup, K, orbits = eight_shell_orbits(data)
        # far single mode pair with no rho-shifted partner
        W = pot.FourierPotential(sup, {(5, 5): 0.3 + 0j, (-5, -5): 0.3 + 0j})
        res = pot.second_order_sum(W, sym, orbits, K, sup.dual_matrix)
        assert res.value == 0.0
        assert res.inconclusive


class TestPlancherel:
    def test_round_trip(self):
        data = lat.classify_angle(2, 1)
        W = pot.twist(reference_potential(), pot.TwistSpec(data, "AA", "Additive"))
        n = 16
        samples = pot.sample_real_space(W, n)
        back = pot.coefficients_from_samples(samples)
        assert set(back) == set(W.coefficients)
        for m, c in W.coefficients.items():
            assert abs(back[m] - c) < 1e-10


class TestFileFormats:
    def test_potential_spec_round_trip(self, tmp_path):
        path = str(tmp_path / "pot.json")
        pot.save_potential_spec(path, [((1, 0), 0.35)], sign=-1)
        oc, sign = pot.load_potential_spec(path)
        assert oc == [((1, 0), 0.35)] and sign == -1

    def test_twisted_dump_round_trip(self, tmp_path):
        data = lat.classify_angle(2, 1)
        W = pot.twist(reference_potential(), pot.TwistSpec(data, "AB", "Additive"))
        path = str(tmp_path / "w.json")
        pot.save_twisted(path, W, data, "AB")
        W2, data2, stacking = pot.load_twisted(path)
        assert stacking == "AB" and (data2.a, data2.b) == (2, 1)
        assert set(W2.coefficients) == set(W.coefficients)
        for m, c in W.coefficients.items():
            assert W2.coefficients[m] == c

    def test_dump_is_byte_stable(self, tmp_path):
        data = lat.classify_angle(2, 1)
        W = pot.twist(reference_potential(), pot.TwistSpec(data, "AA", "Additive"))
        p1, p2 = str(tmp_path / "a.json"), str(tmp_path / "b.json")
        pot.save_twisted(p1, W, data, "AA")
        pot.save_twisted(p2, W, data, "AA")
        assert open(p1, "rb").read() == open(p2, "rb").read()
