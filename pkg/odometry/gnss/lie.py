# odometry/gnss/lie.py
"""
SE(3) machinery: exponential/logarithm maps, Jacobians, poses and trajectories.

Tangent vectors are ordered ``xi = (rho, phi)``: translational part first,
rotational part second. Perturbations are applied on the right,
``T <- T * exp(delta^)``, i.e. in the body frame.
"""
import bisect
import math
from dataclasses import dataclass, field

import numpy as np

from .exceptions import LieGroupError

SMALL_ANGLE = 1e-8          # exp/log series branch
SERIES_ANGLE = 1e-4         # Jacobian coefficient series branch
LOG_PI_MARGIN = 1e-6
REORTHONORMALIZE_EVERY = 100


# ==============================================================================
# SO(3)
# ==============================================================================

def hat(v):
    x, y, z = v
    return np.array([
        [0.0, -z, y],
        [z, 0.0, -x],
        [-y, x, 0.0],
    ])


def vee(m):
    return np.array([m[2, 1], m[0, 2], m[1, 0]])


def _coefficients(theta):
    """(sin t)/t, (1 - cos t)/t^2, (t - sin t)/t^3 evaluated without cancellation."""
    if theta < SERIES_ANGLE:
        t2 = theta * theta
        return 1.0 - t2 / 6.0, 0.5 - t2 / 24.0, 1.0 / 6.0 - t2 / 120.0
    half = 0.5 * theta
    return (math.sin(theta) / theta,
            2.0 * (math.sin(half) / theta) ** 2,
            (theta - math.sin(theta)) / theta ** 3)


def so3_exp(phi):
    phi = np.asarray(phi, dtype=float)
    theta = float(np.linalg.norm(phi))
    P = hat(phi)
    if theta < SMALL_ANGLE:
        return np.eye(3) + P + 0.5 * P @ P
    a, b, _ = _coefficients(theta)
    return np.eye(3) + a * P + b * P @ P


def so3_log(R):
    skew = 0.5 * vee(R - R.T)
    s = float(np.linalg.norm(skew))
    c = 0.5 * (np.trace(R) - 1.0)
    theta = math.atan2(s, c)
    if theta > math.pi - LOG_PI_MARGIN:
        raise LieGroupError("rotation angle too close to pi for a unique logarithm", angle=theta)
    if theta < SMALL_ANGLE:
        return skew * (1.0 + theta * theta / 6.0)
    return skew * (theta / s)


def so3_left_jacobian(phi):
    phi = np.asarray(phi, dtype=float)
    theta = float(np.linalg.norm(phi))
    P = hat(phi)
    _, b, c = _coefficients(theta)
    return np.eye(3) + b * P + c * P @ P


def so3_left_jacobian_inv(phi):
    phi = np.asarray(phi, dtype=float)
    theta = float(np.linalg.norm(phi))
    P = hat(phi)
    if theta < SERIES_ANGLE:
        k = 1.0 / 12.0 + theta * theta / 720.0
    else:
        half = 0.5 * theta
        k = (1.0 - half / math.tan(half)) / (theta * theta)
    return np.eye(3) - 0.5 * P + k * P @ P


def so3_right_jacobian_inv(phi):
    return so3_left_jacobian_inv(-np.asarray(phi, dtype=float))


# ==============================================================================
# SE(3)
# ==============================================================================

def se3_hat(xi):
    m = np.zeros((4, 4))
    m[:3, :3] = hat(xi[3:])
    m[:3, 3] = xi[:3]
    return m


def _q_block(rho, phi):
    theta = float(np.linalg.norm(phi))
    P, Rh = hat(phi), hat(rho)
    PR, RP, PRP = P @ Rh, Rh @ P, P @ Rh @ P
    if theta < SERIES_ANGLE:
        t2 = theta * theta
        c1 = 1.0 / 6.0 - t2 / 120.0
        c2 = 1.0 / 24.0 - t2 / 720.0
        c3 = 1.0 / 120.0 - t2 / 2520.0
    else:
        s, co = math.sin(theta), math.cos(theta)
        c1 = (theta - s) / theta ** 3
        c2 = (theta * theta + 2.0 * co - 2.0) / (2.0 * theta ** 4)
        c3 = (2.0 * theta - 3.0 * s + theta * co) / (2.0 * theta ** 5)
    return (0.5 * Rh
            + c1 * (PR + RP + PRP)
            + c2 * (P @ PR + RP @ P - 3.0 * PRP)
            + c3 * (PRP @ P + P @ PRP))


def se3_left_jacobian(xi):
    xi = np.asarray(xi, dtype=float)
    J = so3_left_jacobian(xi[3:])
    out = np.zeros((6, 6))
    out[:3, :3] = J
    out[3:, 3:] = J
    out[:3, 3:] = _q_block(xi[:3], xi[3:])
    return out


def se3_left_jacobian_inv(xi):
    xi = np.asarray(xi, dtype=float)
    Jinv = so3_left_jacobian_inv(xi[3:])
    out = np.zeros((6, 6))
    out[:3, :3] = Jinv
    out[3:, 3:] = Jinv
    out[:3, 3:] = -Jinv @ _q_block(xi[:3], xi[3:]) @ Jinv
    return out


def se3_right_jacobian_inv(xi):
    return se3_left_jacobian_inv(-np.asarray(xi, dtype=float))


@dataclass(frozen=True, eq=False)
class Pose:
    """Rigid transform T_gv: the vehicle frame expressed in the global frame."""

    rotation: np.ndarray = field(default_factory=lambda: np.eye(3))
    translation: np.ndarray = field(default_factory=lambda: np.zeros(3))
    compositions: int = 0

    @classmethod
    def identity(cls):
        return cls()

    @classmethod
    def from_yaw(cls, yaw, translation=(0.0, 0.0, 0.0)):
        return cls(so3_exp([0.0, 0.0, yaw]), np.asarray(translation, dtype=float))

    def matrix(self):
        m = np.eye(4)
        m[:3, :3] = self.rotation
        m[:3, 3] = self.translation
        return m

    def inverse(self):
        rt = self.rotation.T
        return Pose(rt, -rt @ self.translation, self.compositions)

    def __matmul__(self, other):
        count = max(self.compositions, other.compositions) + 1
        pose = Pose(self.rotation @ other.rotation,
                    self.rotation @ other.translation + self.translation,
                    count)
        if count >= REORTHONORMALIZE_EVERY:
            pose = pose.reorthonormalized()
        return pose

    def act(self, point):
        return self.rotation @ np.asarray(point, dtype=float) + self.translation

    def retract(self, delta):
        return self @ se3_exp(delta)

    def reorthonormalized(self):
        u, _, vt = np.linalg.svd(self.rotation)
        r = u @ vt
        if np.linalg.det(r) < 0:
            u[:, -1] *= -1.0
            r = u @ vt
        return Pose(r, self.translation.copy(), 0)

    def adjoint(self):
        out = np.zeros((6, 6))
        out[:3, :3] = self.rotation
        out[:3, 3:] = hat(self.translation) @ self.rotation
        out[3:, 3:] = self.rotation
        return out

    @property
    def yaw(self):
        return math.atan2(self.rotation[1, 0], self.rotation[0, 0])

    def __repr__(self):
        return f"Pose(t={np.round(self.translation, 4).tolist()}, yaw={self.yaw:.4f})"


def se3_exp(xi):
    """Closed-form exponential: Rodrigues rotation plus the V-matrix translation."""
    xi = np.asarray(xi, dtype=float)
    rho, phi = xi[:3], xi[3:]
    theta = float(np.linalg.norm(phi))
    P = hat(phi)
    if theta < SMALL_ANGLE:
        R = np.eye(3) + P + 0.5 * P @ P
        V = np.eye(3) + 0.5 * P + P @ P / 6.0
    else:
        a, b, c = _coefficients(theta)
        R = np.eye(3) + a * P + b * P @ P
        V = np.eye(3) + b * P + c * P @ P
    return Pose(R, V @ rho)


def se3_log(T):
    phi = so3_log(T.rotation)
    return np.concatenate([so3_left_jacobian_inv(phi) @ T.translation, phi])


def check_twist_bounds(w, max_speed=20.0, max_rate=10.0):
    """Sanity bounds for a slow ground vehicle's body velocity."""
    w = np.asarray(w, dtype=float)
    return (bool(np.all(np.isfinite(w)))
            and np.linalg.norm(w[:3]) < max_speed
            and np.linalg.norm(w[3:]) < max_rate)


# ==============================================================================
# STATES AND TRAJECTORIES
# ==============================================================================

@dataclass(frozen=True, eq=False)
class StateNode:
    """
    One estimation vertex: pose T_gv and body-frame generalized velocity w=(v, omega),
    with kinematics dT/dt = T * w^.
    """

    t: object
    pose: Pose
    twist: np.ndarray = field(default_factory=lambda: np.zeros(6))

    def receiver_position(self, lever_arm):
        return self.pose.act(lever_arm)

    def retract(self, delta):
        """Apply a 12-dof increment: pose on the right, velocity additively."""
        delta = np.asarray(delta, dtype=float)
        return StateNode(self.t, self.pose.retract(delta[:6]), self.twist + delta[6:])

    def extrapolate(self, t):
        """Constant-twist prediction to time ``t``."""
        dt = t - self.t
        return StateNode(t, self.pose @ se3_exp(dt * self.twist), self.twist.copy())


class Trajectory:
    """Time-ordered sequence of StateNodes with geodesic pose interpolation."""

    def __init__(self, nodes=()):
        self.nodes = sorted(nodes, key=lambda n: n.t)
        for earlier, later in zip(self.nodes, self.nodes[1:]):
            if not later.t > earlier.t:
                raise LieGroupError("trajectory timestamps must be strictly increasing",
                                    time=str(later.t))
        self._seconds = [n.t.total_seconds for n in self.nodes]

    def __len__(self):
        return len(self.nodes)

    def __iter__(self):
        return iter(self.nodes)

    def __getitem__(self, index):
        return self.nodes[index]

    @property
    def times(self):
        return [n.t for n in self.nodes]

    @property
    def poses(self):
        return [n.pose for n in self.nodes]

    def positions(self):
        return np.array([n.pose.translation for n in self.nodes]).reshape(-1, 3)

    def span(self):
        return self.nodes[0].t, self.nodes[-1].t

    def transformed(self, G):
        """Left-multiply every pose by a rigid transform ``G``."""
        return Trajectory(StateNode(n.t, G @ n.pose, n.twist) for n in self.nodes)

    def receiver_frame(self, lever_arm):
        offset = Pose(np.eye(3), np.asarray(lever_arm, dtype=float))
        return Trajectory(StateNode(n.t, n.pose @ offset, n.twist) for n in self.nodes)

    def bracket(self, t):
        """Index ``k`` with nodes[k].t <= t <= nodes[k+1].t."""
        if not self.nodes:
            raise LieGroupError("cannot interpolate an empty trajectory")
        first, last = self.span()
        if t < first or t > last:
            raise LieGroupError("query time outside trajectory span",
                                time=str(t), first=str(first), last=str(last))
        k = bisect.bisect_right(self._seconds, t.total_seconds) - 1
        return min(max(k, 0), len(self.nodes) - 1)


def interpolate_pose(traj, t):
    """
    Constant-twist geodesic between the bracketing nodes:
    T(t) = T_k * exp(alpha * log(T_k^-1 * T_k+1)).
    """
    k = traj.bracket(t)
    node = traj[k]
    if t == node.t or k == len(traj) - 1:
        return node.pose
    following = traj[k + 1]
    alpha = (t - node.t) / (following.t - node.t)
    xi = se3_log(node.pose.inverse() @ following.pose)
    return node.pose @ se3_exp(alpha * xi)
