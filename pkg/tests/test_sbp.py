import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from bbmh.errors import ConfigurationError, SingularOperatorError, UsageError
from bbmh.sbp import (FourierOperator, GridSpec, Stencil, UPWIND_PLUS_STENCILS, apply,
                      build_upwind_operators, fourier_inverse_helmholtz)


def _sin_error(n, order, op_name="d_plus"):
    grid = GridSpec(0.0, 1.0, n)
    ops = build_upwind_operators(grid, order)
    x = grid.nodes()
    d = getattr(ops, op_name)
    return np.max(np.abs(d(np.sin(2 * np.pi * x)) - 2 * np.pi * np.cos(2 * np.pi * x)))


class TestGrid:
    def test_nodes_and_spacing(self):
        g = GridSpec(-1.0, 1.0, 8)
        assert g.h == pytest.approx(0.25)
        np.testing.assert_allclose(g.nodes(), -1.0 + 0.25 * np.arange(8))

    @pytest.mark.parametrize("n", [0, 3, 2.5])
    def test_rejects_small_or_fractional_n(self, n):
        with pytest.raises(ConfigurationError):
            GridSpec(0.0, 1.0, n)

    def test_rejects_empty_interval(self):
        with pytest.raises(ConfigurationError):
            GridSpec(1.0, 1.0, 8)


class TestStencil:
    def test_dense_matches_definition(self):
        s = Stencil(6, -1, [1.0, 2.0, 3.0])
        a = s.dense()
        assert a[0, 5] == 1.0 and a[0, 0] == 2.0 and a[0, 1] == 3.0
        assert a[5, 4] == 1.0 and a[5, 0] == 3.0

    def test_zero_trimming_keeps_bandwidth_tight(self):
        s = Stencil(10, -2, [0.0, 0.0, 1.0, 0.0])
        assert s.offset == 0 and s.width == 1

    def test_algebra_matches_dense(self, rng):
        a = Stencil(12, -2, rng.standard_normal(4))
        b = Stencil(12, 0, rng.standard_normal(3))
        np.testing.assert_allclose((a @ b).dense(), a.dense() @ b.dense(), atol=1e-13)
        np.testing.assert_allclose((a + 2.0 * b).dense(), a.dense() + 2 * b.dense(), atol=1e-14)
        np.testing.assert_allclose(a.T.dense(), a.dense().T)

    def test_symbol_is_spectrum(self, rng):
        s = Stencil(16, -1, rng.standard_normal(4))
        ev = np.linalg.eigvals(s.dense())
        sym = s.symbol()
        for lam in sym:
            assert np.min(np.abs(ev - lam)) < 1e-12

    def test_too_wide_for_grid(self):
        with pytest.raises(ConfigurationError):
            Stencil(3, 0, np.ones(5))

    def test_grid_mismatch(self):
        with pytest.raises(UsageError):
            Stencil(8, 0, [1.0]) + Stencil(9, 0, [1.0])


class TestUpwindOperators:
    @pytest.mark.parametrize("n", [16, 32, 64])
    def test_sbp_identity(self, order, n):
        ops = build_upwind_operators(GridSpec(0.0, 1.0, n), order)
        m = ops.dense("mass")
        resid = m @ ops.dense("d_plus") + ops.dense("d_minus").T @ m
        assert np.max(np.abs(resid)) <= 1e-13

    def test_n16_order2_example(self):
        ops = build_upwind_operators(GridSpec(0.0, 1.0, 16), 2)
        m = ops.dense("mass")
        assert np.max(np.abs(m @ ops.dense("d_plus") + ops.dense("d_minus").T @ m)) < 1e-14

    def test_constants_in_kernel(self, unit_ops):
        one = np.ones(unit_ops.n)
        for d in (unit_ops.d_plus, unit_ops.d_minus, unit_ops.d_central):
            assert np.max(np.abs(d(one))) < 1e-12

    def test_central_is_average(self, unit_ops):
        np.testing.assert_allclose(
            unit_ops.dense("d_central"),
            0.5 * (unit_ops.dense("d_plus") + unit_ops.dense("d_minus")), atol=1e-12)

    @pytest.mark.parametrize("n", [16, 32])
    def test_dissipation_eigenvalues(self, order, n):
        ops = build_upwind_operators(GridSpec(0.0, 1.0, n), order)
        diss = 0.5 * ops.dense("mass") @ (ops.dense("d_plus") - ops.dense("d_minus"))
        assert np.max(np.linalg.eigvalsh(0.5 * (diss + diss.T))) <= 1e-12

    def test_dissipation_random_sample(self, order, rng):
        ops = build_upwind_operators(GridSpec(0.0, 1.0, 64), order)
        for _ in range(100):
            x = rng.standard_normal(64)
            q = ops.inner(x, ops.d_plus(x) - ops.d_minus(x))
            assert q <= 1e-12 * np.dot(x, x)

    def test_convergence_rate(self, order):
        for name in ("d_plus", "d_minus"):
            errs = [_sin_error(n, order, name) for n in (64, 128, 256)]
            rates = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
            assert np.all(np.abs(rates - order) < 0.3), rates

    def test_order4_ratio_16(self):
        ratio = _sin_error(256, 4) / _sin_error(512, 4)
        assert ratio == pytest.approx(16.0, rel=0.05)

    def test_unit_vector_gives_dense_column(self, unit_ops):
        dense = unit_ops.dense("d_plus")
        for j in (0, 5, unit_ops.n - 1):
            e = np.zeros(unit_ops.n)
            e[j] = 1.0
            np.testing.assert_allclose(unit_ops.d_plus(e), dense[:, j], atol=1e-12)

    @pytest.mark.parametrize("order", [1, 5, 6])
    def test_unsupported_order(self, order):
        with pytest.raises(ConfigurationError):
            build_upwind_operators(GridSpec(0.0, 1.0, 32), order)

    def test_grid_too_small(self):
        with pytest.raises(ConfigurationError):
            build_upwind_operators(GridSpec(0.0, 1.0, 9), 4)

    def test_stencil_tables_are_exact_fractions(self):
        for order, (offset, coeffs) in UPWIND_PLUS_STENCILS.items():
            assert sum(coeffs) == 0
            assert sum(c * (offset + k) for k, c in enumerate(coeffs)) == 1


class TestApply:
    def test_length_mismatch(self, unit_ops):
        with pytest.raises(UsageError):
            apply(unit_ops.d_plus, np.ones(unit_ops.n + 1))

    @settings(max_examples=50, deadline=None)
    @given(arrays(np.float64, 24, elements=st.floats(-1e3, 1e3)))
    def test_matches_dense_product(self, x):
        ops = build_upwind_operators(GridSpec(0.0, 2.0, 24), 4)
        np.testing.assert_allclose(ops.d_plus(x), ops.dense("d_plus") @ x,
                                   atol=1e-9 * (1 + np.max(np.abs(x))))


class TestFourier:
    def test_requires_power_of_two(self):
        with pytest.raises(ConfigurationError):
            FourierOperator(GridSpec(0.0, 1.0, 48))

    def test_wavenumbers(self):
        fop = FourierOperator(GridSpec(0.0, 2 * np.pi, 8))
        np.testing.assert_allclose(sorted(fop.wavenumbers), np.arange(-4, 4))

    @pytest.mark.parametrize("k", [1, 3, 7])
    def test_derivative_of_cosine(self, k):
        grid = GridSpec(0.0, 2 * np.pi, 32)
        x = grid.nodes()
        fop = FourierOperator(grid)
        np.testing.assert_allclose(fop.derivative(np.cos(k * x)), -k * np.sin(k * x), atol=1e-12)
        np.testing.assert_allclose(fop.derivative(np.sin(k * x), 2), -k**2 * np.sin(k * x),
                                   atol=1e-11)

    def test_shift_translates(self):
        grid = GridSpec(0.0, 2 * np.pi, 64)
        x = grid.nodes()
        fop = FourierOperator(grid)
        np.testing.assert_allclose(fop.shift(np.sin(3 * x), 0.4), np.sin(3 * (x - 0.4)),
                                   atol=1e-12)

    def test_helmholtz_identity(self, rng):
        fop = FourierOperator(GridSpec(0.0, 1.0, 64))
        rhs = rng.standard_normal(64)
        np.testing.assert_array_equal(fourier_inverse_helmholtz(fop, 0.0, rhs), rhs)

    def test_helmholtz_single_mode(self):
        grid = GridSpec(0.0, 2 * np.pi, 32)
        x = grid.nodes()
        y = fourier_inverse_helmholtz(FourierOperator(grid), 0.3, np.sin(2 * x))
        np.testing.assert_allclose(y, np.sin(2 * x) / (1 - 0.3 * 4), atol=1e-13)

    def test_helmholtz_residual(self, rng):
        grid = GridSpec(0.0, 3.0, 64)
        fop = FourierOperator(grid)
        rhs = rng.standard_normal(64)
        rhs -= fop.apply_symbol(rhs, (np.arange(33) == 32).astype(float))  # drop Nyquist
        y = fourier_inverse_helmholtz(fop, -0.05, rhs)
        resid = y - 0.05 * fop.derivative(y, 2) - rhs
        assert np.linalg.norm(resid) <= 1e-12 * np.linalg.norm(rhs)

    def test_helmholtz_singular_mode_reported(self):
        grid = GridSpec(0.0, 2 * np.pi, 16)
        with pytest.raises(SingularOperatorError) as info:
            fourier_inverse_helmholtz(FourierOperator(grid), 0.25, np.ones(16))
        assert info.value.mode == 2
