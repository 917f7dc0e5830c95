"""Weighted actions, exact cocycles, ball averages and the maximal bound.

The ball aggregation is checked against a brute enumeration histogram
before anything else relies on it; averages, Folner ratios and the
coboundary display are then verified as exact rational identities.
"""

from fractions import Fraction

import numpy as np
import pytest

from heisgeo import ergodic as er
from heisgeo.balls import ball_cardinality, enumerate_ball, folner_ratio, symmetric_difference_coords
from heisgeo.core import (
    LatticePoint,
    dist_le_exact,
    generator,
    inverse,
    lattice_identity,
    multiply,
)
from heisgeo.errors import ResourceCapError

E1 = generator(1, 0)


def rand_lat(rng, span=9):
    a = int(rng.integers(-span, span + 1))
    b = int(rng.integers(-span, span + 1))
    return LatticePoint((a,), (b,), a * b + 2 * int(rng.integers(-30, 31)))


def uniform_quotient():
    return er.make_quotient_action(1, 3)


def skewed_quotient():
    # masses proportional to 1..27
    return er.make_quotient_action(1, 3, [Fraction(i + 1, 378) for i in range(27)])


def indicator(target):
    return lambda y: Fraction(1) if y == target else Fraction(0)


class TestCountCongruent:
    def test_against_brute_force(self):
        rng = np.random.default_rng(0)
        for _ in range(200):
            lo = int(rng.integers(-50, 50))
            hi = lo + int(rng.integers(-3, 40))
            mod = int(rng.integers(2, 9))
            r = int(rng.integers(0, mod))
            brute = sum(1 for x in range(lo, hi + 1) if x % mod == r)
            assert er._count_congruent(lo, hi, r, mod) == brute


class TestQuotientAction:
    def test_state_count(self):
        # m^{2n+1} points: 27 for n=1, m=3
        assert len(uniform_quotient().states) == 27
        assert len(er.make_quotient_action(1, 2).states) == 8

    def test_bad_arguments(self):
        with pytest.raises(ValueError):
            er.make_quotient_action(1, 1)
        with pytest.raises(ValueError):
            er.make_quotient_action(0, 3)
        with pytest.raises(ValueError):
            er.make_quotient_action(1, 3, [Fraction(1, 27)] * 26)
        with pytest.raises(ValueError):
            er.make_quotient_action(1, 3, [Fraction(1, 26)] * 26 + [Fraction(0)])
        bad = [Fraction(1, 13)] * 26 + [Fraction(-1)]
        with pytest.raises(ValueError):
            er.make_quotient_action(1, 3, bad)

    def test_label_homomorphism(self):
        act = uniform_quotient()
        rng = np.random.default_rng(3)
        for _ in range(300):
            g, h = rand_lat(rng), rand_lat(rng)
            assert act.label_of(multiply(g, h)) == act.label_mul(
                act.label_of(g), act.label_of(h))

    def test_action_axiom(self):
        act = skewed_quotient()
        rng = np.random.default_rng(4)
        x = act.states[7]
        for _ in range(200):
            g, h = rand_lat(rng), rand_lat(rng)
            assert act.act(g, act.act(h, x)) == act.act(multiply(g, h), x)

    def test_translations_are_bijections(self):
        act = uniform_quotient()
        for lab in (act.label_of(E1), act.label_of(rand_lat(np.random.default_rng(5)))):
            image = {act.act_label(lab, x) for x in act.states}
            assert image == set(act.states)

    def test_uniform_masses_measure_preserving(self):
        act = uniform_quotient()
        rng = np.random.default_rng(6)
        for _ in range(50):
            assert er.rn_derivative(act, rand_lat(rng), act.states[13]) == 1

    def test_identity_derivative(self):
        act = skewed_quotient()
        for x in act.states[:5]:
            assert er.rn_derivative(act, lattice_identity(1), x) == 1

    def test_cocycle_identity_exact(self):
        act = skewed_quotient()
        rng = np.random.default_rng(7)
        for _ in range(2000):
            g, h = rand_lat(rng), rand_lat(rng)
            x = act.states[int(rng.integers(0, 27))]
            lhs = er.rn_derivative(act, multiply(g, h), x)
            rhs = er.rn_derivative(act, g, act.act(h, x)) * er.rn_derivative(act, h, x)
            assert lhs == rhs

    def test_orbit_transitive(self):
        assert er.orbit_transitive(uniform_quotient())


class TestTorusAction:
    def test_bad_arguments(self):
        with pytest.raises(ValueError):
            er.make_torus_action(1, (0.3, 0.4), 1)
        with pytest.raises(ValueError):
            er.make_torus_action(1, (0.3,), 8)

    def test_center_acts_trivially(self):
        act = er.make_torus_action(1, (0.375, 0.625), 8)
        center = LatticePoint((0,), (0,), 4)
        for x in act.states[:6]:
            assert act.act(center, x) == x

    def test_composition_matches_group_law(self):
        act = er.make_torus_action(1, (0.375, 0.625), 8)
        rng = np.random.default_rng(8)
        for _ in range(200):
            g, h = rand_lat(rng), rand_lat(rng)
            assert act.label_of(multiply(g, h)) == act.label_mul(
                act.label_of(g), act.label_of(h))

    def test_measure_preserving(self):
        act = er.make_torus_action(1, (0.375, 0.625), 8)
        rng = np.random.default_rng(9)
        for _ in range(30):
            assert er.rn_derivative(act, rand_lat(rng), act.states[3]) == 1

    def test_transitivity_depends_on_shifts(self):
        assert er.orbit_transitive(er.make_torus_action(1, (0.375, 0.625), 8))
        # shifts (4, 4) on an 8-grid only reach a 4-point sub-orbit
        assert not er.orbit_transitive(er.make_torus_action(1, (0.5, 0.5), 8))


class TestBallLabelCounts:
    def test_matches_enumeration_oracle(self):
        act = skewed_quotient()
        for k in range(1, 6):
            counts = er.ball_label_counts(act, k)
            direct: dict = {}
            for p in enumerate_ball(1, k).points():
                lab = act.label_of(p)
                direct[lab] = direct.get(lab, 0) + 1
            assert counts == direct

    def test_torus_counts_match_oracle(self):
        act = er.make_torus_action(1, (0.375, 0.625), 8)
        for k in (2, 4):
            counts = er.ball_label_counts(act, k)
            direct: dict = {}
            for p in enumerate_ball(1, k).points():
                lab = act.label_of(p)
                direct[lab] = direct.get(lab, 0) + 1
            assert counts == direct

    def test_total_is_ball_cardinality_at_40(self):
        act = uniform_quotient()
        assert sum(er.ball_label_counts(act, 40).values()) == ball_cardinality(1, 40)

    def test_cap_and_domain(self):
        act = uniform_quotient()
        with pytest.raises(ResourceCapError):
            er.ball_label_counts(act, 40, cap=1000)
        with pytest.raises(ValueError):
            er.ball_label_counts(act, 0)


class TestWeightedAverage:
    def test_constant_function_exact(self):
        act = skewed_quotient()
        c = Fraction(3, 7)
        for k in (1, 4, 9):
            for x in (act.states[0], act.states[19]):
                res = er.weighted_average(act, lambda y: c, k, x)
                assert res.value == c
                assert res.denominator > 0
                assert res.value == res.numerator / res.denominator

    def test_equidistribution_at_40(self):
        # calibrated: worst basis-indicator error is ~3e-5, frozen bound 0.02
        act = uniform_quotient()
        counts = er.ball_label_counts(act, 40)
        worst = Fraction(0)
        for target in act.states:
            f = indicator(target)
            for x in act.states:
                num, den = er._weighted_sums(act, counts, f, x)
                worst = max(worst, abs(num / den - Fraction(1, 27)))
        assert worst <= Fraction(2, 100)

    def test_monotone_error_decay(self):
        act = uniform_quotient()
        worst = {}
        for k in (5, 40):
            counts = er.ball_label_counts(act, k)
            w = Fraction(0)
            for target in act.states:
                f = indicator(target)
                for x in act.states:
                    num, den = er._weighted_sums(act, counts, f, x)
                    w = max(w, abs(num / den - Fraction(1, 27)))
            worst[k] = w
        assert worst[40] < worst[5]

    def test_coboundary_identity_exact(self):
        # f = c + h - sigma-hat h makes the average c plus a boundary term
        act = skewed_quotient()
        sigma, k, x0 = E1, 6, act.states[2]
        h_map = {x: Fraction((i * i) % 11, 7) for i, x in enumerate(act.states)}
        om = {x: er.rn_derivative(act, sigma, x) for x in act.states}
        f = lambda y: Fraction(2, 5) + h_map[y] - h_map[act.act(sigma, y)] * om[y]
        val = er.weighted_average(act, f, k, x0).value
        delta = symmetric_difference_coords(1, k, sigma)
        pts = [LatticePoint(tuple(r[:1]), tuple(r[1:2]), int(r[2]))
               for r in delta.tolist()]
        ident = lattice_identity(1)
        pos = neg = Fraction(0)
        for p in pts:
            term = h_map[act.act(p, x0)] * er.rn_derivative(act, p, x0)
            if dist_le_exact(p, ident, k):
                pos += term  # g in B_k minus sigma B_k
            else:
                neg += term  # g in sigma B_k minus B_k
        _, den = er._weighted_sums(act, er.ball_label_counts(act, k), None, x0)
        assert val - Fraction(2, 5) == (pos - neg) / den


class TestNsfcRatio:
    def test_identity_is_zero(self):
        act = skewed_quotient()
        assert er.nsfc_ratio(act, 6, lattice_identity(1), act.states[5]) == 0

    def test_uniform_equals_folner_ratio(self):
        act = uniform_quotient()
        for k in (4, 8):
            assert er.nsfc_ratio(act, k, E1, act.states[0]) == folner_ratio(1, k, E1)

    def test_nonuniform_ratio_decays(self):
        act = skewed_quotient()
        x = act.states[2]
        assert er.nsfc_ratio(act, 40, E1, x) < er.nsfc_ratio(act, 5, E1, x)

    def test_bounded_by_boundary_weight(self):
        # sigma-difference sits inside the t-boundary with t = d(sigma, 0)
        for act in (uniform_quotient(), skewed_quotient()):
            for k in (5, 8):
                for x in (act.states[0], act.states[11]):
                    ns = er.nsfc_ratio(act, k, E1, x)
                    bd = er.boundary_weight_ratio(act, k, 1, x)
                    assert ns <= bd


class TestDiscreteMaximal:
    def test_zero_a_holds(self):
        b = {E1: Fraction(3), lattice_identity(1): Fraction(1)}
        out = er.discrete_maximal_check({}, b, 3, Fraction(1, 2), 12)
        assert out.holds and out.lhs == 0 and out.rhs == 0

    def test_equal_weights_strictness(self):
        # a = b and eps >= 1: strict comparison never fires, H is empty
        w = {lattice_identity(1): Fraction(2), E1: Fraction(1, 3)}
        out = er.discrete_maximal_check(dict(w), dict(w), 3, Fraction(1), 12)
        assert out.holds and out.rhs == 0

    def test_random_trials_hold(self):
        rng = np.random.default_rng(1)
        b10 = enumerate_ball(1, 10).points()
        for _ in range(40):
            idx = rng.choice(len(b10), size=20, replace=False)
            supp = [b10[i] for i in idx]
            a = {p: Fraction(int(rng.integers(-9, 10)), int(rng.integers(1, 7)))
                 for p in supp[:12]}
            b = {p: Fraction(int(rng.integers(0, 9)), int(rng.integers(1, 5)))
                 for p in supp[8:]}
            out = er.discrete_maximal_check(a, b, 3, Fraction(1, 3), 12)
            assert out.holds

    def test_absurd_constant_can_fail(self):
        # the check is not vacuous: C far below the true BCP constant fails
        a = {lattice_identity(1): Fraction(1)}
        b = {lattice_identity(1): Fraction(1)}
        out = er.discrete_maximal_check(a, b, 2, Fraction(1, 2), Fraction(1, 100))
        assert not out.holds

    def test_validation(self):
        with pytest.raises(ValueError):
            er.discrete_maximal_check({}, {}, 3, Fraction(0), 12)
        with pytest.raises(ValueError):
            er.discrete_maximal_check({}, {}, 0, Fraction(1), 12)
        with pytest.raises(ValueError):
            er.discrete_maximal_check({}, {E1: Fraction(-1)}, 3, Fraction(1), 12)


class TestMaximalExperiment:
    def test_zero_function(self):
        act = skewed_quotient()
        out = er.maximal_inequality_experiment(act, lambda y: Fraction(0),
                                               Fraction(1, 4), 4)
        assert out.lhs_measure == 0

    def test_large_eps_empty_set(self):
        act = uniform_quotient()
        f = {x: Fraction(i % 3, 2) for i, x in enumerate(act.states)}
        out = er.maximal_inequality_experiment(act, f, Fraction(2), 4)
        assert out.lhs_measure == 0

    def test_random_function_bounded(self):
        act = skewed_quotient()
        rng = np.random.default_rng(12)
        for _ in range(3):
            f = {x: Fraction(int(rng.integers(-6, 7)), 3) for x in act.states}
            out = er.maximal_inequality_experiment(act, f, Fraction(1, 4), 6)
            assert out.lhs_measure <= out.bound
            assert out.d_emp >= 1


class TestInterfaces:
    def test_quotient_spec_roundtrip(self):
        act = skewed_quotient()
        clone = er.action_from_spec(act.spec)
        assert clone.mass == act.mass
        assert clone.states == act.states

    def test_torus_spec_roundtrip(self):
        act = er.make_torus_action(1, (0.375, 0.625), 8)
        clone = er.action_from_spec(act.spec)
        assert clone.spec["shifts"] == act.spec["shifts"]

    def test_unknown_spec_type(self):
        with pytest.raises(ValueError):
            er.action_from_spec({"type": "flow"})

    def test_experiment_csv_deterministic(self):
        act = uniform_quotient()
        f = indicator(act.states[0])
        rows = er.convergence_rows(act, f, [3, 5])
        text = er.experiment_csv(rows)
        assert text.splitlines()[0] == "k,x_id,value,abs_err"
        assert len(text.splitlines()) == 1 + 2 * 27
        assert text == er.experiment_csv(er.convergence_rows(act, f, [3, 5]))

    def test_constant_rows_have_zero_error(self):
        act = skewed_quotient()
        rows = er.convergence_rows(act, lambda y: Fraction(1, 2), [2, 3])
        assert all(err == 0 for *_rest, err in rows)
