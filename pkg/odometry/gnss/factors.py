# odometry/gnss/factors.py
"""
Residuals and analytic Jacobians for every factor in the odometry graph.

Residual functions return raw (unwhitened) errors with Jacobians taken with
respect to right perturbations of each node: ``delta = (rho, phi)`` on the pose
and an additive increment on the body twist. The ``Factor`` classes wrap them,
whiten with the factor's information and expose a common ``linearize`` that
returns 12-column blocks per node.
"""
import logging
from dataclasses import dataclass

import numpy as np

from .exceptions import FactorError
from .lie import hat, se3_log, se3_left_jacobian_inv, se3_right_jacobian_inv, so3_log, so3_right_jacobian_inv

logger = logging.getLogger('odometry')

NODE_DOF = 12
TIME_MATCH_TOLERANCE = 1e-3  # s
UNIT_TOLERANCE = 1e-12


def _unit(v):
    v = np.asarray(v, dtype=float)
    norm = float(np.linalg.norm(v))
    if norm == 0.0:
        raise FactorError("line of sight has zero length")
    return v / norm


def _position_jacobian(node, lever):
    """d(receiver position)/d(pose perturbation), 3x6."""
    R = node.pose.rotation
    return np.hstack([R, -R @ hat(lever)])


# ==============================================================================
# TDCP
# ==============================================================================

@dataclass(frozen=True, eq=False)
class TdcpPairMeasurement:
    """
    Double-differenced carrier phase for one satellite pair between two epochs.

    Satellite positions are emission-corrected and expressed in the estimator's
    ENU frame. ``phase_dd`` is already corrected for the broadcast satellite
    clocks; ``atmo_dd`` is the modelled delay double difference.
    """

    t_a: object
    t_b: object
    ref_sat: str
    other_sat: str
    phase_dd: float
    ref_a: np.ndarray
    ref_b: np.ndarray
    other_a: np.ndarray
    other_b: np.ndarray
    u_ref: np.ndarray
    u_other: np.ndarray
    atmo_dd: float = 0.0
    weight: float = 1.0 / 0.01 ** 2

    def __post_init__(self):
        if self.ref_sat == self.other_sat:
            raise FactorError("a TDCP pair needs two distinct satellites", sat_id=self.ref_sat)
        if not self.t_b > self.t_a:
            raise FactorError("TDCP pair must satisfy t_b > t_a", t_a=str(self.t_a))
        if self.weight <= 0.0:
            raise FactorError("TDCP weight must be positive")
        for name in ("u_ref", "u_other"):
            u = np.asarray(getattr(self, name), dtype=float)
            if abs(np.linalg.norm(u) - 1.0) > UNIT_TOLERANCE:
                u = _unit(u)
            object.__setattr__(self, name, u)
        for name in ("ref_a", "ref_b", "other_a", "other_b"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=float))


def geometric_dd(m, position_a, position_b):
    """Double-differenced geometric range: (other_b - other_a) - (ref_b - ref_a)."""
    def rng(sat, p):
        return float(np.linalg.norm(sat - p))

    return ((rng(m.other_b, position_b) - rng(m.other_a, position_a))
            - (rng(m.ref_b, position_b) - rng(m.ref_a, position_a)))


def tdcp_residual(m, node_a, node_b, lever_arm=(0.0, 0.0, 0.0)):
    """
    e = phase_dd - rho_dd - atmo_dd with exact ranges; J_a and J_b are 1x6.

    A receiver displacement ``d`` at epoch b moves the error by
    ``(u_other - u_ref) . d`` to first order.
    """
    lever = np.asarray(lever_arm, dtype=float)
    p_a = node_a.receiver_position(lever)
    p_b = node_b.receiver_position(lever)
    e = m.phase_dd - geometric_dd(m, p_a, p_b) - m.atmo_dd

    de_dpa = _unit(m.ref_a - p_a) - _unit(m.other_a - p_a)
    de_dpb = _unit(m.other_b - p_b) - _unit(m.ref_b - p_b)
    J_a = (de_dpa @ _position_jacobian(node_a, lever)).reshape(1, 6)
    J_b = (de_dpb @ _position_jacobian(node_b, lever)).reshape(1, 6)
    return e, J_a, J_b


def dcs_scale(chi2, phi):
    """Dynamic covariance scaling factor, min(1, 2*phi / (phi + chi2))."""
    if chi2 < 0.0 or phi <= 0.0:
        raise FactorError("DCS needs chi2 >= 0 and phi > 0", chi2=chi2, phi=phi)
    return min(1.0, 2.0 * phi / (phi + chi2))


def dcs_cost(chi2, phi):
    """
    Robust cost whose gradient is the DCS-reweighted least-squares gradient.

    Equal to ``chi2`` up to ``phi``, then ``3*phi - 4*phi**2 / (phi + chi2)``.
    Its slope in ``chi2`` is the squared scale, and it never exceeds ``3*phi``.
    """
    if chi2 < 0.0 or phi <= 0.0:
        raise FactorError("DCS needs chi2 >= 0 and phi > 0", chi2=chi2, phi=phi)
    if chi2 <= phi:
        return chi2
    return 3.0 * phi - 4.0 * phi * phi / (phi + chi2)


# ==============================================================================
# MOTION PRIOR
# ==============================================================================

def wnoa_covariance(dt, qc):
    """Q(dt) for a white-noise-on-acceleration prior on (pose, twist)."""
    if dt <= 0.0:
        raise FactorError("motion prior needs dt > 0", dt=dt)
    qc = np.asarray(qc, dtype=float)
    return np.block([
        [dt ** 3 / 3.0 * qc, dt ** 2 / 2.0 * qc],
        [dt ** 2 / 2.0 * qc, dt * qc],
    ])


def wnoa_information(dt, qc):
    """Closed-form inverse of ``wnoa_covariance``."""
    if dt <= 0.0:
        raise FactorError("motion prior needs dt > 0", dt=dt)
    qi = np.linalg.inv(np.asarray(qc, dtype=float))
    return np.block([
        [12.0 / dt ** 3 * qi, -6.0 / dt ** 2 * qi],
        [-6.0 / dt ** 2 * qi, 4.0 / dt * qi],
    ])


def wnoa_residual(node_k, node_k1, qc=None):
    """
    e = [log(T_k^-1 T_k1) - dt * w_k ; w_k1 - w_k] with 12x12 Jacobians.

    With ``qc`` given, the error and Jacobians come back whitened by Q(dt).
    """
    dt = node_k1.t - node_k.t
    if dt <= 0.0:
        raise FactorError("motion prior needs dt > 0", dt=dt)
    xi = se3_log(node_k.pose.inverse() @ node_k1.pose)
    e = np.concatenate([xi - dt * node_k.twist, node_k1.twist - node_k.twist])

    I6 = np.eye(6)
    J_k = np.zeros((12, 12))
    J_k[:6, :6] = -se3_left_jacobian_inv(xi)
    J_k[:6, 6:] = -dt * I6
    J_k[6:, 6:] = -I6
    J_k1 = np.zeros((12, 12))
    J_k1[:6, :6] = se3_right_jacobian_inv(xi)
    J_k1[6:, 6:] = I6
    if qc is not None:
        W = np.linalg.cholesky(wnoa_information(dt, qc)).T
        return W @ e, W @ J_k, W @ J_k1
    return e, J_k, J_k1


# ==============================================================================
# UNARY AND RELATIVE-POSE FACTORS
# ==============================================================================

def nonholonomic_residual(node, sigmas=(0.05, 0.05)):
    """Lateral and vertical body velocity, whitened; J is 2x12."""
    sy, sz = sigmas
    e = np.array([node.twist[1] / sy, node.twist[2] / sz])
    J = np.zeros((2, NODE_DOF))
    J[0, 7] = 1.0 / sy
    J[1, 8] = 1.0 / sz
    return e, J


def position_prior_residual(node, prior_pos, sigma, lever_arm=(0.0, 0.0, 0.0)):
    lever = np.asarray(lever_arm, dtype=float)
    e = (node.receiver_position(lever) - np.asarray(prior_pos, dtype=float)) / sigma
    J = np.zeros((3, NODE_DOF))
    J[:, :6] = _position_jacobian(node, lever) / sigma
    return e, J


def attitude_prior_residual(node, prior_rotation, sigmas):
    """Rotation error log(R_prior^T R), whitened per axis (roll, pitch, yaw)."""
    sig = np.asarray(sigmas, dtype=float)
    eps = so3_log(np.asarray(prior_rotation).T @ node.pose.rotation)
    J = np.zeros((3, NODE_DOF))
    J[:, 3:6] = so3_right_jacobian_inv(eps) / sig[:, None]
    return eps / sig, J


def rel_pose_residual(m, node_a, node_b):
    """e = log(M^-1 T_a^-1 T_b), unwhitened; 6x6 Jacobians."""
    for measured, node in ((m.t_a, node_a), (m.t_b, node_b)):
        if abs(measured - node.t) > TIME_MATCH_TOLERANCE:
            raise FactorError("relative pose timestamp does not match a node",
                              measured=str(measured), node=str(node.t))
    T_ab = node_a.pose.inverse() @ node_b.pose
    eps = se3_log(m.T_ab.inverse() @ T_ab)
    Jr_inv = se3_right_jacobian_inv(eps)
    J_b = Jr_inv
    J_a = -Jr_inv @ T_ab.inverse().adjoint()
    return eps, J_a, J_b


# ==============================================================================
# FACTORS
# ==============================================================================

def _pad(block):
    out = np.zeros((block.shape[0], NODE_DOF))
    out[:, :block.shape[1]] = block
    return out


class Factor:
    """
    A whitened residual over one or two nodes, addressed by node key.

    ``linearize(nodes)`` returns ``(r, blocks)`` where ``blocks`` maps each key
    to an ``(len(r), 12)`` Jacobian. ``robust`` factors rescale both by their
    kernel each time they are linearized, and report the kernel's cost rather
    than half the squared rescaled residual.
    """

    kind = "factor"
    robust = False

    def __init__(self, keys):
        self.keys = tuple(keys)

    def evaluate(self, nodes):
        raise NotImplementedError

    def linearize(self, nodes):
        return self.evaluate(nodes)

    def linearize_with_cost(self, nodes):
        r, blocks = self.linearize(nodes)
        return r, blocks, 0.5 * float(r @ r)

    def cost(self, nodes):
        r, _ = self.evaluate(nodes)
        return 0.5 * float(r @ r)


class TdcpFactor(Factor):
    kind = "tdcp"
    robust = True

    def __init__(self, key_a, key_b, measurement, lever_arm, dcs_phi=4.0):
        super().__init__((key_a, key_b))
        self.measurement = measurement
        self.lever_arm = np.asarray(lever_arm, dtype=float)
        self.dcs_phi = dcs_phi
        self.last_scale = 1.0

    def evaluate(self, nodes):
        a, b = self.keys
        e, J_a, J_b = tdcp_residual(self.measurement, nodes[a], nodes[b], self.lever_arm)
        root = np.sqrt(self.measurement.weight)
        return np.array([root * e]), {a: _pad(root * J_a), b: _pad(root * J_b)}

    def linearize_with_cost(self, nodes):
        r, blocks = self.evaluate(nodes)
        chi2 = float(r @ r)
        s = dcs_scale(chi2, self.dcs_phi)
        self.last_scale = s
        return s * r, {k: s * J for k, J in blocks.items()}, 0.5 * dcs_cost(chi2, self.dcs_phi)

    def linearize(self, nodes):
        r, blocks, _ = self.linearize_with_cost(nodes)
        return r, blocks

    def cost(self, nodes):
        r, _ = self.evaluate(nodes)
        return 0.5 * dcs_cost(float(r @ r), self.dcs_phi)


class MotionPriorFactor(Factor):
    kind = "wnoa"

    def __init__(self, key_k, key_k1, dt, qc):
        super().__init__((key_k, key_k1))
        self.sqrt_information = np.linalg.cholesky(wnoa_information(dt, qc)).T

    def evaluate(self, nodes):
        k, k1 = self.keys
        e, J_k, J_k1 = wnoa_residual(nodes[k], nodes[k1])
        W = self.sqrt_information
        return W @ e, {k: W @ J_k, k1: W @ J_k1}


class NonholonomicFactor(Factor):
    kind = "nonholonomic"

    def __init__(self, key, sigmas):
        super().__init__((key,))
        self.sigmas = tuple(sigmas)

    def evaluate(self, nodes):
        (k,) = self.keys
        e, J = nonholonomic_residual(nodes[k], self.sigmas)
        return e, {k: J}


class PositionPriorFactor(Factor):
    kind = "position_prior"

    def __init__(self, key, prior_pos, sigma, lever_arm):
        super().__init__((key,))
        self.prior_pos = np.asarray(prior_pos, dtype=float)
        self.sigma = sigma
        self.lever_arm = np.asarray(lever_arm, dtype=float)

    def evaluate(self, nodes):
        (k,) = self.keys
        e, J = position_prior_residual(nodes[k], self.prior_pos, self.sigma, self.lever_arm)
        return e, {k: J}


class AttitudePriorFactor(Factor):
    kind = "attitude_prior"

    def __init__(self, key, prior_rotation, sigmas):
        super().__init__((key,))
        self.prior_rotation = np.asarray(prior_rotation, dtype=float)
        self.sigmas = tuple(sigmas)

    def evaluate(self, nodes):
        (k,) = self.keys
        e, J = attitude_prior_residual(nodes[k], self.prior_rotation, self.sigmas)
        return e, {k: J}


class RelPoseFactor(Factor):
    kind = "rel_pose"

    def __init__(self, key_a, key_b, measurement):
        super().__init__((key_a, key_b))
        self.measurement = measurement
        self.sqrt_information = np.linalg.cholesky(np.linalg.inv(measurement.covariance)).T

    def evaluate(self, nodes):
        a, b = self.keys
        e, J_a, J_b = rel_pose_residual(self.measurement, nodes[a], nodes[b])
        W = self.sqrt_information
        return W @ e, {a: _pad(W @ J_a), b: _pad(W @ J_b)}


class TwistPriorFactor(Factor):
    """Loose prior on the body twist of the first node, from the Doppler bootstrap."""

    kind = "twist_prior"

    def __init__(self, key, prior_twist, sigmas):
        super().__init__((key,))
        self.prior_twist = np.asarray(prior_twist, dtype=float)
        self.sigmas = np.asarray(sigmas, dtype=float)

    def evaluate(self, nodes):
        (k,) = self.keys
        e = (nodes[k].twist - self.prior_twist) / self.sigmas
        J = np.zeros((6, NODE_DOF))
        J[:, 6:] = np.diag(1.0 / self.sigmas)
        return e, {k: J}
