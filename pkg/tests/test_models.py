import itertools

import numpy as np
import pytest

from bbmh.errors import ParameterError, UsageError
from bbmh.models import (ADMISSIBILITY_CONDITIONS, BBMHModel, BBMModel, SplittingParams, State,
                         bbm_energy_inner, bbm_rhs, bbmh_rhs_explicit, bbmh_rhs_implicit,
                         invariants, max_wave_speeds, validate_splitting, well_prepared_init)
from bbmh.sbp import GridSpec, build_upwind_operators
from bbmh.waves import SolitonParams, bbm_soliton


def random_state(rng, n):
    return State(*rng.standard_normal((3, n)))


def brute_force_violations(d1, d2, d3, eps):
    """The five admissibility bullets, evaluated literally."""
    out = []
    if not all(0 <= d <= 1 for d in (d1, d2, d3)):
        out.append(0)
    if not d1 * eps <= 1 + 1e-15:
        out.append(1)
    if not d2 * eps <= 1 + 1e-15:
        out.append(2)
    if (d1 == 0) != (d2 == 0):
        out.append(3)
    u1, u2 = abs(d1 * eps - 1) < 1e-15, abs(d2 * eps - 1) < 1e-15
    if u1 != u2:
        out.append(4)
    return [ADMISSIBILITY_CONDITIONS[i] for i in out]


class TestSplitting:
    @pytest.mark.parametrize("eps", [1e-6, 0.01, 0.5, 1.0])
    def test_default_is_admissible(self, eps):
        assert validate_splitting(SplittingParams(0, 0, 1, eps)) == []

    def test_one_zero_delta(self):
        v = validate_splitting(SplittingParams(0.0, 0.5, 0.0, 0.1))
        assert v == ["if delta1 = 0 or delta2 = 0, then both of them are zero"]

    def test_one_unit_product(self):
        v = validate_splitting(SplittingParams(1.0, 0.5, 0.0, 1.0))
        assert v == ["if delta1 * eps = 1 or delta2 * eps = 1, then both of them are unity"]

    def test_matches_brute_force(self):
        deltas = np.linspace(0.0, 1.0, 10)
        for d1, d2, d3, eps in itertools.product(deltas, deltas, deltas,
                                                 [0.1, 0.5, 1.0, 1.125, 2.25]):
            sp = SplittingParams(d1, d2, d3, eps)
            assert validate_splitting(sp) == brute_force_violations(d1, d2, d3, eps)

    def test_eps_must_be_positive(self):
        with pytest.raises(ParameterError):
            SplittingParams(eps=0.0)


class TestState:
    def test_round_trip(self, rng):
        s = random_state(rng, 10)
        back = State.from_array(s.as_array())
        np.testing.assert_array_equal(back.w, s.w)

    def test_length_mismatch(self):
        with pytest.raises(UsageError):
            State(np.zeros(4), np.zeros(4), np.zeros(5))


class TestRightHandSides:
    def test_zero_and_constant_states(self, unit_ops):
        n = unit_ops.n
        sp = SplittingParams(0.3, 0.3, 0.5, 0.2)
        for u in (np.zeros(n), np.full(n, 2.5)):
            q = State(u, np.zeros(n), np.zeros(n))
            assert np.max(np.abs(bbmh_rhs_explicit(q, sp, unit_ops).as_array())) < 1e-12
        assert np.all(bbmh_rhs_implicit(State(*np.zeros((3, n))), sp, unit_ops).as_array() == 0)

    def test_implicit_read_off(self, unit_ops, rng):
        n = unit_ops.n
        v = rng.standard_normal(n)
        g = bbmh_rhs_implicit(State(np.zeros(n), v, np.zeros(n)), SplittingParams(eps=0.3),
                              unit_ops)
        np.testing.assert_allclose(g.u, -unit_ops.d_plus(v))
        np.testing.assert_array_equal(g.v, 0.0)
        np.testing.assert_array_equal(g.w, -v)

    def test_explicit_mass_neutral(self, rng):
        ops = build_upwind_operators(GridSpec(0.0, 1.0, 32), 4)
        f = bbmh_rhs_explicit(random_state(rng, 32), SplittingParams(0.5, 0.5, 0.5, 0.4), ops)
        assert abs(ops.integral(f.u)) < 1e-13

    @pytest.mark.parametrize("sp", [SplittingParams(0, 0, 1, 1e-3), SplittingParams(0.4, 0.4, 0.3, 0.9),
                                    SplittingParams(1.0, 1.0, 0.0, 1.0)])
    def test_each_part_energy_neutral_for_equal_deltas(self, unit_ops, rng, sp):
        model = BBMHModel(unit_ops, sp)
        for _ in range(20):
            q = rng.standard_normal((3, unit_ops.n))
            for part in (model.explicit, model.implicit):
                t = part(q)
                scale = np.sqrt(model.energy_inner(q, q) * model.energy_inner(t, t))
                assert abs(model.energy_inner(q, t)) <= 1e-12 * scale

    def test_unequal_deltas_exchange_energy_between_parts(self, unit_ops, rng):
        # f and g trade eps (d1 - d2) v^T M D- u; only their sum is neutral
        sp = SplittingParams(0.4, 0.7, 0.3, 0.9)
        model = BBMHModel(unit_ops, sp)
        q = rng.standard_normal((3, unit_ops.n))
        f, g = model.explicit(q), model.implicit(q)
        ops = unit_ops
        exchange = sp.eps * (sp.delta1 - sp.delta2) * ops.inner(q[1], ops.d_minus(q[0]))
        assert model.energy_inner(q, f) == pytest.approx(exchange, rel=1e-10)
        total = model.energy_inner(q, f + g)
        assert abs(total) <= 1e-12 * np.sqrt(model.energy_inner(q, q) * model.energy_inner(f + g, f + g))

    def test_nonconservative_form_breaks_energy(self, unit_ops, rng):
        sp = SplittingParams(eps=0.5)
        q = rng.standard_normal((3, unit_ops.n)) + 1.0
        model = BBMHModel(unit_ops, sp, conservative=False)
        t = model.explicit(q)
        assert abs(model.energy_inner(q, t)) > 1e-6 * np.sqrt(
            model.energy_inner(q, q) * model.energy_inner(t, t))

    def test_bbm_zero_and_constant(self, unit_ops):
        assert np.all(bbm_rhs(np.zeros(unit_ops.n), unit_ops) == 0)
        assert np.max(np.abs(bbm_rhs(np.full(unit_ops.n, 3.0), unit_ops))) < 1e-12

    def test_bbm_energy_and_mass_neutral(self, unit_ops, rng):
        for _ in range(20):
            eta = rng.standard_normal(unit_ops.n)
            r = bbm_rhs(eta, unit_ops)
            scale = np.sqrt(bbm_energy_inner(eta, eta, unit_ops) * bbm_energy_inner(r, r, unit_ops))
            assert abs(bbm_energy_inner(eta, r, unit_ops)) <= 1e-12 * scale
            assert abs(unit_ops.integral(r)) <= 1e-12 * np.sqrt(unit_ops.n) * unit_ops.norm(r)


class TestInvariants:
    def test_zero(self, unit_ops):
        inv = invariants(State(*np.zeros((3, unit_ops.n))), SplittingParams(eps=0.1), unit_ops)
        assert (inv.linear_u, inv.energy) == (0.0, 0.0)

    def test_constant_on_unit_interval(self, unit_ops):
        n = unit_ops.n
        inv = invariants(State(np.ones(n), np.zeros(n), np.zeros(n)), SplittingParams(eps=0.3),
                         unit_ops)
        assert inv.linear_u == pytest.approx(1.0, abs=1e-14)
        assert inv.energy == pytest.approx(0.5, abs=1e-14)

    def test_eps_weight(self, unit_ops):
        n = unit_ops.n
        inv = invariants(State(np.zeros(n), np.ones(n), np.zeros(n)), SplittingParams(eps=0.5),
                         unit_ops)
        assert inv.energy == pytest.approx(0.125)

    def test_bbm_soliton_quadrature(self):
        grid = GridSpec(-90.0, 90.0, 1024)
        ops = build_upwind_operators(grid, 4)
        x = grid.nodes()
        eta = bbm_soliton(SolitonParams(1.2, grid), x)
        inv = invariants(eta, None, ops)
        k = 0.5 * np.sqrt(0.2 / 1.2)
        sech2 = 1.0 / np.cosh(k * x) ** 2
        deta = 0.6 * (-2.0 * k) * sech2 * np.tanh(k * x)
        xx = np.append(x, 90.0)
        trap = np.trapezoid(np.append(0.5 * (eta**2 + deta**2), 0.5 * (eta[0]**2 + deta[0]**2)), xx)
        assert inv.energy == pytest.approx(trap, rel=1e-5)

    def test_requires_eps_for_bbmh(self, unit_ops):
        with pytest.raises(UsageError):
            invariants(State(*np.zeros((3, unit_ops.n))), None, unit_ops)


class TestWaveSpeeds:
    def _state(self, u, n=8):
        return State(np.full(n, u), np.zeros(n), np.zeros(n))

    def test_default_splitting_eps1(self):
        assert max_wave_speeds(self._state(0.0), SplittingParams(0, 0, 1, 1.0)) == (1.0, 1.0)

    def test_pure_advection(self):
        assert max_wave_speeds(self._state(2.0), SplittingParams(0, 0, 0, 0.5))[0] == 2.0

    def test_implicit_speed(self):
        _, imp = max_wave_speeds(self._state(0.0), SplittingParams(1, 1, 0, 0.1))
        assert imp == pytest.approx(9.0)

    def test_explicit_includes_coupling(self):
        exp, _ = max_wave_speeds(self._state(0.0), SplittingParams(1, 1, 0, 0.1))
        assert exp == pytest.approx(1.0)


class TestWellPrepared:
    def test_constant(self, unit_ops):
        q = well_prepared_init(np.full(unit_ops.n, 4.0), unit_ops, "consistent", 0.1, 1.2)
        assert np.max(np.abs(q.v)) < 1e-10 and np.max(np.abs(q.w)) < 1e-10

    def test_consistent_v(self, soliton_ops):
        grid, ops = soliton_ops
        eta = bbm_soliton(SolitonParams(1.2, grid), grid.nodes())
        q = well_prepared_init(eta, ops, "consistent", 1e-3, 1.2)
        np.testing.assert_allclose(q.v, 1.2 * ops.d_central(ops.d_central(eta)))
        np.testing.assert_allclose(q.w, ops.d_central(eta))
        np.testing.assert_array_equal(q.u, eta)

    def test_zero_mode_and_options(self, soliton_ops):
        grid, ops = soliton_ops
        eta = bbm_soliton(SolitonParams(1.2, grid), grid.nodes())
        q = well_prepared_init(eta, ops, "zero", 1e-3, 1.2, w_op="minus", w_sign=-1.0)
        assert np.all(q.v == 0.0)
        np.testing.assert_allclose(q.w, -ops.d_minus(eta))

    def test_bad_mode(self, unit_ops):
        with pytest.raises(UsageError):
            well_prepared_init(np.ones(unit_ops.n), unit_ops, "other")
        with pytest.raises(UsageError):
            well_prepared_init(np.ones(unit_ops.n), unit_ops, w_op="upwind")


class TestModels:
    def test_solve_implicit_inverts(self, unit_ops, rng):
        model = BBMHModel(unit_ops, SplittingParams(0.2, 0.2, 0.5, 0.3))
        q = rng.standard_normal((3, unit_ops.n))
        rhs = q - 0.05 * model.implicit(q)
        np.testing.assert_allclose(model.solve_implicit(rhs, 0.05), q, atol=1e-11)

    def test_bbm_model_trivial_implicit(self, unit_ops, rng):
        model = BBMModel(unit_ops)
        x = rng.standard_normal(unit_ops.n)
        assert np.all(model.implicit(x) == 0)
        assert model.solve_implicit(x, 0.3) is x
