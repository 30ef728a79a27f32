"""The matrix-discounted integral, its spectral gate, and the stopped
operator factorization."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sdlevy.decomposition import (FirstJump, FirstJumpIn, FixedTime,
                                  IndependentRandomTime, KthJump)
from sdlevy.discount import (TruncationPolicy, sample_discounted_integral,
                             sample_discounted_integral_many)
from sdlevy.errors import SpectralGateError
from sdlevy.levy import ExponentialJumps, JumpSet, LevyModel
from sdlevy.operator import (IndependentCoordinates, OperatorModel,
                             SharedJumpDirection, matrix_exp, operator_decompose,
                             operator_decompose_many, sample_operator_integral,
                             sample_operator_integral_many)
from sdlevy.rng import RngStream
from sdlevy.stats import ks_two_sample

POLICY = TruncationPolicy()


def _coord(alpha=2.0, lam=1.0, drift=0.0):
    return LevyModel(jump_rate=alpha, jump_law=ExponentialJumps(lam), drift=drift)


def _model_2d(q=None):
    q = np.diag([1.0, 2.0]) if q is None else np.asarray(q, float)
    return OperatorModel(q, IndependentCoordinates((_coord(2.0, 1.0),
                                                    _coord(1.0, 2.0, drift=0.3))))


class TestMatrixExp:
    def test_zero(self):
        np.testing.assert_array_equal(matrix_exp(np.zeros((3, 3))), np.eye(3))

    def test_diagonal(self):
        m = matrix_exp(np.diag([1.0, -2.0]))
        np.testing.assert_allclose(np.diagonal(m), [np.e, np.exp(-2.0)], rtol=1e-14)

    def test_inverse_pair(self):
        rng = np.random.default_rng(7)
        m = rng.normal(size=(4, 4))
        np.testing.assert_allclose(matrix_exp(m) @ matrix_exp(-m), np.eye(4),
                                   atol=1e-8)

    def test_validation(self):
        with pytest.raises(ValueError):
            matrix_exp(np.ones((2, 3)))
        with pytest.raises(ValueError):
            matrix_exp(np.array([[np.nan, 0.0], [0.0, 1.0]]))

    @given(seed=st.integers(0, 2**31), s=st.floats(0.0, 3.0), t=st.floats(0.0, 3.0))
    @settings(max_examples=50, deadline=None)
    def test_semigroup(self, seed, s, t):
        m = np.random.default_rng(seed).normal(size=(3, 3))
        lhs = matrix_exp((s + t) * m)
        rhs = matrix_exp(s * m) @ matrix_exp(t * m)
        np.testing.assert_allclose(lhs, rhs, rtol=1e-8, atol=1e-10)


class TestSpectralGate:
    def test_positive_spectrum_accepted(self):
        _model_2d(np.array([[1.0, 0.5], [0.0, 2.0]]))  # triangular, eigs 1 and 2

    def test_singular_rejected(self):
        with pytest.raises(SpectralGateError):
            _model_2d(np.zeros((2, 2)))

    def test_negative_real_part_rejected(self):
        with pytest.raises(SpectralGateError):
            _model_2d(np.diag([1.0, -0.5]))

    def test_gate_tolerance(self):
        with pytest.raises(SpectralGateError):
            _model_2d(np.diag([1.0, 1e-13]))
        _model_2d(np.diag([1.0, 1e-3]))  # clearly positive passes

    def test_rotation_with_positive_real_part_accepted(self):
        # complex eigenvalue pair 1 +- 2i still has positive real part
        _model_2d(np.array([[1.0, -2.0], [2.0, 1.0]]))

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            OperatorModel(np.eye(3), IndependentCoordinates((_coord(), _coord())))

    def test_gaussian_driver_rejected(self):
        with pytest.raises(ValueError):
            IndependentCoordinates((LevyModel(gauss_var=1.0),))


class TestScalarConsistency:
    def test_d1_bit_identical_to_scalar(self):
        model = LevyModel(jump_rate=2.0, jump_law=ExponentialJumps(1.0), drift=0.5)
        op = OperatorModel(np.array([[1.0]]), IndependentCoordinates((model,)))
        x_op = sample_operator_integral(op, POLICY, RngStream(99))
        x_sc = sample_discounted_integral(model, POLICY, RngStream(99))
        assert x_op.shape == (1,)
        assert float(x_op[0]) == x_sc  # exact, same draws and float ops

    def test_scaled_identity_reduces_per_coordinate(self, make_stream):
        # with Q = cI the coordinate integral sum_k e^{-c t_k} J_k has the
        # law of a scalar discounted integral at jump rate alpha / c
        c, alpha, lam = 2.0, 3.0, 1.0
        op = OperatorModel(c * np.eye(2),
                           IndependentCoordinates((_coord(alpha, lam),
                                                   _coord(alpha, lam))))
        draws = sample_operator_integral_many(op, POLICY, 30_000, make_stream())
        scalar = sample_discounted_integral_many(
            LevyModel(jump_rate=alpha / c, jump_law=ExponentialJumps(lam)),
            TruncationPolicy(horizon=c * POLICY.horizon), 30_000, make_stream())
        assert ks_two_sample(draws[:, 0], scalar)[2]
        assert ks_two_sample(draws[:, 1], scalar)[2]


class TestMeanIdentity:
    def test_diag_model(self, make_stream):
        model = _model_2d()
        draws = sample_operator_integral_many(model, POLICY, 100_000, make_stream())
        target = model.mean_integral()
        se = draws.std(axis=0) / np.sqrt(draws.shape[0])
        assert np.all(np.abs(draws.mean(axis=0) - target) <= 3.0 * se)

    def test_non_diagonal_model(self, make_stream):
        q = np.array([[2.0, 1.0], [0.0, 1.0]])
        model = _model_2d(q)
        np.testing.assert_allclose(model.q @ model.mean_integral(),
                                   model.driver.mean_unit_increment(), rtol=1e-12)
        stream = make_stream()
        draws = np.array([sample_operator_integral(model, POLICY, s)
                          for s in stream.split(20_000)])
        se = draws.std(axis=0) / np.sqrt(draws.shape[0])
        assert np.all(np.abs(draws.mean(axis=0) - model.mean_integral()) <= 3.0 * se)

    def test_shared_direction_driver(self, make_stream):
        driver = SharedJumpDirection(_coord(2.0, 1.0), (1.0, -0.5))
        model = OperatorModel(np.diag([1.0, 2.0]), driver)
        stream = make_stream()
        draws = np.array([sample_operator_integral(model, POLICY, s)
                          for s in stream.split(20_000)])
        se = draws.std(axis=0) / np.sqrt(draws.shape[0])
        assert np.all(np.abs(draws.mean(axis=0) - model.mean_integral()) <= 4.0 * se)


class TestOperatorDecomposition:
    @pytest.mark.parametrize("rule", [
        FixedTime(0.7), FirstJump(), KthJump(3),
        IndependentRandomTime(ExponentialJumps(1.0)),
    ])
    def test_residuals(self, rule, make_stream):
        records = operator_decompose_many(_model_2d(), rule, POLICY, 200,
                                          make_stream())
        assert all(r.passes(1e-9) for r in records)

    def test_non_diagonal_residuals(self, make_stream):
        model = _model_2d(np.array([[2.0, 1.0], [0.5, 3.0]]))
        records = operator_decompose_many(model, FirstJump(), POLICY, 200,
                                          make_stream())
        assert all(r.passes(1e-9) for r in records)

    def test_fixed_time_zero(self, make_stream):
        r = operator_decompose(_model_2d(), FixedTime(0.0), POLICY, make_stream())
        np.testing.assert_array_equal(r.x_tau, np.zeros(2))
        np.testing.assert_allclose(r.discount, np.eye(2))
        np.testing.assert_allclose(r.x_prime, r.x_total)

    def test_marginal_matches_integral(self, make_stream):
        model = _model_2d()
        records = operator_decompose_many(model, FirstJump(), POLICY, 5_000,
                                          make_stream())
        x_total = np.array([r.x_total for r in records])
        draws = sample_operator_integral_many(model, POLICY, 5_000, make_stream())
        assert ks_two_sample(x_total[:, 0], draws[:, 0])[2]
        assert ks_two_sample(x_total[:, 1], draws[:, 1])[2]

    def test_unsupported_rule(self, make_stream):
        rule = FirstJumpIn(JumpSet("ge", 1.0))
        with pytest.raises(ValueError):
            operator_decompose(_model_2d(), rule, POLICY, make_stream())
