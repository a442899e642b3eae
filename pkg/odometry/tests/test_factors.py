# odometry/tests/test_factors.py
import numpy as np
from django.test import SimpleTestCase
from hypothesis import given, strategies as st

from odometry.gnss.exceptions import FactorError
from odometry.gnss.factors import (
    MotionPriorFactor,
    NonholonomicFactor,
    RelPoseFactor,
    TdcpFactor,
    TdcpPairMeasurement,
    TwistPriorFactor,
    attitude_prior_residual,
    dcs_cost,
    dcs_scale,
    geometric_dd,
    nonholonomic_residual,
    position_prior_residual,
    rel_pose_residual,
    tdcp_residual,
    wnoa_covariance,
    wnoa_information,
    wnoa_residual,
)
from odometry.gnss.frames import GpsTime
from odometry.gnss.lie import Pose, StateNode, se3_exp, so3_exp
from odometry.gnss.observations import RelPoseMeasurement

T0 = GpsTime.from_week_sow(2316, 572400.0)
LEVER = np.array([0.5, 0.0, 1.0])
QC = np.diag([0.1, 0.01, 0.01, 0.001, 0.001, 0.01])


def numeric_jacobian(fn, node, h):
    """Central differences of ``fn`` over the node's 12-dof right perturbation."""
    columns = []
    for i in range(12):
        d = np.zeros(12)
        d[i] = h
        ahead = np.atleast_1d(fn(node.retract(d)))
        behind = np.atleast_1d(fn(node.retract(-d)))
        columns.append((ahead - behind) / (2.0 * h))
    return np.column_stack(columns)


def _nodes():
    a = StateNode(T0, Pose(so3_exp([0.1, -0.2, 0.3]), np.array([1.0, 2.0, 3.0])),
                  np.array([1.0, 0.1, 0.0, 0.01, 0.02, 0.1]))
    b = StateNode(T0 + 1.0, a.pose @ se3_exp([1.1, 0.05, -0.02, 0.01, 0.0, 0.12]),
                  np.array([1.05, 0.0, 0.02, 0.0, 0.01, 0.11]))
    return a, b


def _measurement(node_a, node_b, offset=0.0):
    ref_a, ref_b = np.array([1.0e7, 1.2e7, 1.8e7]), np.array([1.0003e7, 1.2001e7, 1.7999e7])
    other_a, other_b = np.array([-1.5e7, 0.4e7, 1.6e7]), np.array([-1.5002e7, 0.4003e7, 1.6001e7])
    p_a, p_b = node_a.receiver_position(LEVER), node_b.receiver_position(LEVER)
    u_ref = (ref_b - p_b) / np.linalg.norm(ref_b - p_b)
    u_other = (other_b - p_b) / np.linalg.norm(other_b - p_b)
    draft = TdcpPairMeasurement(node_a.t, node_b.t, "G05", "G07", 0.0,
                                ref_a, ref_b, other_a, other_b, u_ref, u_other)
    return TdcpPairMeasurement(node_a.t, node_b.t, "G05", "G07",
                               geometric_dd(draft, p_a, p_b) + offset,
                               ref_a, ref_b, other_a, other_b, u_ref, u_other)


class TdcpResidualTests(SimpleTestCase):
    def test_zero_at_truth(self):
        a, b = _nodes()
        e, _, _ = tdcp_residual(_measurement(a, b), a, b, LEVER)
        self.assertAlmostEqual(e, 0.0, delta=1e-7)

    def test_jacobians_match_finite_differences(self):
        a, b = _nodes()
        m = _measurement(a, b, offset=0.3)
        _, J_a, J_b = tdcp_residual(m, a, b, LEVER)
        num_a = numeric_jacobian(lambda n: tdcp_residual(m, n, b, LEVER)[0], a, 1e-3)
        num_b = numeric_jacobian(lambda n: tdcp_residual(m, a, n, LEVER)[0], b, 1e-3)
        np.testing.assert_allclose(J_a, num_a[:, :6], atol=1e-4)
        np.testing.assert_allclose(J_b, num_b[:, :6], atol=1e-4)
        np.testing.assert_allclose(num_a[:, 6:], 0.0, atol=1e-6)

    def test_receiver_displacement_sign(self):
        a, b = _nodes()
        m = _measurement(a, b)
        shift = np.array([0.02, -0.01, 0.03])
        moved = StateNode(b.t, Pose(b.pose.rotation, b.pose.translation + shift), b.twist)
        e, _, _ = tdcp_residual(m, a, moved, LEVER)
        self.assertAlmostEqual(e, float((m.u_other - m.u_ref) @ shift), delta=1e-6)

    def test_measurement_validation(self):
        a, b = _nodes()
        m = _measurement(a, b)
        with self.assertRaises(FactorError):
            TdcpPairMeasurement(a.t, b.t, "G05", "G05", 0.0, m.ref_a, m.ref_b, m.other_a, m.other_b,
                                m.u_ref, m.u_other)
        with self.assertRaises(FactorError):
            TdcpPairMeasurement(b.t, a.t, "G05", "G07", 0.0, m.ref_a, m.ref_b, m.other_a, m.other_b,
                                m.u_ref, m.u_other)
        with self.assertRaises(FactorError):
            TdcpPairMeasurement(a.t, b.t, "G05", "G07", 0.0, m.ref_a, m.ref_b, m.other_a, m.other_b,
                                np.zeros(3), m.u_other)

    def test_unit_vectors_are_normalized(self):
        a, b = _nodes()
        m = _measurement(a, b)
        scaled = TdcpPairMeasurement(a.t, b.t, "G05", "G07", 0.0, m.ref_a, m.ref_b, m.other_a,
                                     m.other_b, 3.0 * m.u_ref, m.u_other)
        self.assertAlmostEqual(np.linalg.norm(scaled.u_ref), 1.0, places=12)


class DcsTests(SimpleTestCase):
    def test_inliers_untouched(self):
        self.assertEqual(dcs_scale(0.0, 4.0), 1.0)
        self.assertEqual(dcs_scale(4.0, 4.0), 1.0)

    def test_outliers_downweighted(self):
        self.assertAlmostEqual(dcs_scale(12.0, 4.0), 0.5)

    @given(st.floats(min_value=0.0, max_value=1e12), st.floats(min_value=1e-3, max_value=100.0))
    def test_scaled_cost_is_bounded(self, chi2, phi):
        s = dcs_scale(chi2, phi)
        self.assertTrue(0.0 < s <= 1.0)
        self.assertLessEqual(s * s * chi2, max(chi2, 4.0 * phi) + 1e-9)

    def test_invalid_arguments(self):
        with self.assertRaises(FactorError):
            dcs_scale(-1.0, 4.0)
        with self.assertRaises(FactorError):
            dcs_scale(1.0, 0.0)

    def test_cost_is_quadratic_for_inliers(self):
        self.assertEqual(dcs_cost(2.5, 4.0), 2.5)
        self.assertAlmostEqual(dcs_cost(4.0 + 1e-9, 4.0), 4.0, places=6)

    @given(st.floats(min_value=0.0, max_value=1e9), st.floats(min_value=0.0, max_value=1e9),
           st.floats(min_value=1e-3, max_value=100.0))
    def test_cost_is_monotone_and_bounded(self, x, y, phi):
        low, high = sorted((x, y))
        self.assertLessEqual(dcs_cost(low, phi), dcs_cost(high, phi) + 1e-9)
        self.assertLessEqual(dcs_cost(high, phi), 3.0 * phi)

    def test_cost_slope_is_the_squared_scale(self):
        for chi2 in (1.0, 6.0, 40.0, 900.0):
            h = 1e-6 * chi2
            slope = (dcs_cost(chi2 + h, 4.0) - dcs_cost(chi2 - h, 4.0)) / (2.0 * h)
            with self.subTest(chi2=chi2):
                self.assertAlmostEqual(slope, dcs_scale(chi2, 4.0) ** 2, places=5)

    def test_robust_factor_reports_the_kernel_cost(self):
        a, b = _nodes()
        nodes = {"a": a, "b": b}
        factor = TdcpFactor("a", "b", _measurement(a, b, offset=5.0), LEVER, dcs_phi=4.0)
        r, _ = factor.evaluate(nodes)
        expected = 0.5 * dcs_cost(float(r @ r), 4.0)
        _, _, cost = factor.linearize_with_cost(nodes)
        self.assertAlmostEqual(cost, expected)
        self.assertAlmostEqual(factor.cost(nodes), expected)
        self.assertLess(cost, 6.0)

    def test_robust_factor_rescales_a_five_metre_outlier(self):
        a, b = _nodes()
        factor = TdcpFactor("a", "b", _measurement(a, b, offset=5.0), LEVER, dcs_phi=4.0)
        r, blocks = factor.linearize({"a": a, "b": b})
        self.assertLess(factor.last_scale, 1e-3)
        self.assertLess(abs(r[0]), 1.0)
        self.assertEqual(blocks["a"].shape, (1, 12))


class MotionPriorTests(SimpleTestCase):
    def test_information_inverts_covariance(self):
        for dt in (0.5, 1.0, 3.0):
            product = wnoa_covariance(dt, QC) @ wnoa_information(dt, QC)
            np.testing.assert_allclose(product, np.eye(12), atol=1e-9)

    def test_constant_twist_motion_has_zero_error(self):
        a, _ = _nodes()
        b = a.extrapolate(T0 + 2.0)
        e, _, _ = wnoa_residual(a, b)
        np.testing.assert_allclose(e, np.zeros(12), atol=1e-12)

    def test_jacobians_match_finite_differences(self):
        a, b = _nodes()
        _, J_k, J_k1 = wnoa_residual(a, b)
        num_k = numeric_jacobian(lambda n: wnoa_residual(n, b)[0], a, 1e-6)
        num_k1 = numeric_jacobian(lambda n: wnoa_residual(a, n)[0], b, 1e-6)
        np.testing.assert_allclose(J_k, num_k, atol=1e-6)
        np.testing.assert_allclose(J_k1, num_k1, atol=1e-6)

    def test_whitened_form(self):
        a, b = _nodes()
        e, J_k, _ = wnoa_residual(a, b)
        ew, Jw_k, _ = wnoa_residual(a, b, QC)
        info = wnoa_information(1.0, QC)
        self.assertAlmostEqual(float(ew @ ew), float(e @ info @ e), delta=1e-9 * float(e @ info @ e))
        np.testing.assert_allclose(Jw_k.T @ Jw_k, J_k.T @ info @ J_k, rtol=1e-9, atol=1e-6)
        factor = MotionPriorFactor("a", "b", 1.0, QC)
        r, _ = factor.linearize({"a": a, "b": b})
        np.testing.assert_allclose(r, ew, atol=1e-9)

    def test_non_increasing_time(self):
        a, _ = _nodes()
        with self.assertRaises(FactorError):
            wnoa_residual(a, a)
        with self.assertRaises(FactorError):
            wnoa_covariance(0.0, QC)


class UnaryFactorTests(SimpleTestCase):
    def test_nonholonomic(self):
        a, _ = _nodes()
        e, J = nonholonomic_residual(a, (0.05, 0.1))
        np.testing.assert_allclose(e, [0.1 / 0.05, 0.0])
        np.testing.assert_allclose(J, numeric_jacobian(lambda n: nonholonomic_residual(n, (0.05, 0.1))[0], a, 1e-6),
                                   atol=1e-9)
        r, blocks = NonholonomicFactor("a", (0.05, 0.1)).linearize({"a": a})
        np.testing.assert_allclose(r, e)
        self.assertEqual(blocks["a"].shape, (2, 12))

    def test_position_prior(self):
        a, _ = _nodes()
        prior = a.receiver_position(LEVER) + np.array([0.2, 0.0, -0.4])
        e, J = position_prior_residual(a, prior, 2.0, LEVER)
        np.testing.assert_allclose(e, [-0.1, 0.0, 0.2], atol=1e-12)
        num = numeric_jacobian(lambda n: position_prior_residual(n, prior, 2.0, LEVER)[0], a, 1e-6)
        np.testing.assert_allclose(J, num, atol=1e-8)

    def test_attitude_prior(self):
        a, _ = _nodes()
        prior = so3_exp([0.05, -0.02, 0.2])
        sigmas = (0.02, 0.02, 1.0)
        _, J = attitude_prior_residual(a, prior, sigmas)
        num = numeric_jacobian(lambda n: attitude_prior_residual(n, prior, sigmas)[0], a, 1e-6)
        np.testing.assert_allclose(J, num, atol=1e-5)

    def test_twist_prior(self):
        a, _ = _nodes()
        factor = TwistPriorFactor("a", a.twist, np.full(6, 0.5))
        r, blocks = factor.linearize({"a": a})
        np.testing.assert_allclose(r, np.zeros(6))
        np.testing.assert_allclose(blocks["a"][:, 6:], 2.0 * np.eye(6))
        self.assertEqual(factor.cost({"a": a}), 0.0)


class RelPoseFactorTests(SimpleTestCase):
    def _measurement(self, a, b, cov=None):
        true_ab = a.pose.inverse() @ b.pose
        measured = true_ab @ se3_exp([0.01, -0.02, 0.005, 0.001, -0.002, 0.003])
        return RelPoseMeasurement(a.t, b.t, measured, np.eye(6) * 1e-4 if cov is None else cov)

    def test_jacobians_match_finite_differences(self):
        a, b = _nodes()
        m = self._measurement(a, b)
        _, J_a, J_b = rel_pose_residual(m, a, b)
        num_a = numeric_jacobian(lambda n: rel_pose_residual(m, n, b)[0], a, 1e-6)
        num_b = numeric_jacobian(lambda n: rel_pose_residual(m, a, n)[0], b, 1e-6)
        np.testing.assert_allclose(J_a, num_a[:, :6], atol=1e-6)
        np.testing.assert_allclose(J_b, num_b[:, :6], atol=1e-6)

    def test_exact_measurement_has_zero_error(self):
        a, b = _nodes()
        m = RelPoseMeasurement(a.t, b.t, a.pose.inverse() @ b.pose)
        eps, _, _ = rel_pose_residual(m, a, b)
        np.testing.assert_allclose(eps, np.zeros(6), atol=1e-12)

    def test_whitening_uses_the_covariance(self):
        a, b = _nodes()
        m = self._measurement(a, b, cov=np.eye(6) * 0.04)
        eps, _, _ = rel_pose_residual(m, a, b)
        r, blocks = RelPoseFactor("a", "b", m).linearize({"a": a, "b": b})
        np.testing.assert_allclose(r, eps / 0.2, atol=1e-12)
        self.assertEqual(blocks["b"].shape, (6, 12))

    def test_timestamp_mismatch(self):
        a, b = _nodes()
        m = RelPoseMeasurement(a.t, b.t + 0.5, Pose())
        with self.assertRaises(FactorError):
            rel_pose_residual(m, a, b)
