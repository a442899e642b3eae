# odometry/gnss/paths.py
"""Scripted vehicle motion built from constant-twist segments."""
import bisect
import math

import numpy as np

from .exceptions import SimulationError
from .lie import Pose, se3_exp


class SegmentPath:
    """
    Piecewise constant-twist motion starting from ``start_pose``.

    Each segment is ``(duration, twist)``; the last segment extends forever.
    Within a segment the pose is ``T_k * exp((t - t_k) * twist)``, which keeps the
    body-frame velocity exactly forward-only for ground vehicles.
    """

    def __init__(self, start_pose, segments):
        if not segments:
            raise SimulationError("a path needs at least one segment")
        self.segments = [(float(d), np.asarray(w, dtype=float)) for d, w in segments]
        self.start_times = [0.0]
        self.start_poses = [start_pose]
        for duration, twist in self.segments[:-1]:
            self.start_poses.append(self.start_poses[-1] @ se3_exp(duration * twist))
            self.start_times.append(self.start_times[-1] + duration)

    def state(self, elapsed):
        """Vehicle pose T_gv and body twist at ``elapsed`` seconds after the start."""
        k = max(0, bisect.bisect_right(self.start_times, elapsed) - 1)
        twist = self.segments[k][1]
        pose = self.start_poses[k] @ se3_exp((elapsed - self.start_times[k]) * twist)
        return pose, twist.copy()


def _forward(speed, yaw_rate=0.0):
    return np.array([speed, 0.0, 0.0, 0.0, 0.0, yaw_rate])


def loop_path(start_pose, speed, radius, clockwise=False):
    rate = (-1.0 if clockwise else 1.0) * speed / radius
    return SegmentPath(start_pose, [(math.inf, _forward(speed, rate))])


def static_path(start_pose):
    return SegmentPath(start_pose, [(math.inf, np.zeros(6))])


def waypoint_path(waypoints, speed, fillet_radius, lever_arm=(0.0, 0.0, 0.0)):
    """
    Polyline through ENU waypoints (east, north) with circular fillets at each
    corner, translated so that the receiver antenna starts at the origin. The
    initial heading is the first leg's direction; after the last waypoint the
    vehicle keeps driving straight.
    """
    points = [np.asarray(p, dtype=float)[:2] for p in waypoints]
    if len(points) < 2:
        raise SimulationError("a waypoint path needs at least two points")
    if speed <= 0.0:
        raise SimulationError("a waypoint path needs a positive speed")

    legs = [b - a for a, b in zip(points, points[1:])]
    lengths = [float(np.linalg.norm(v)) for v in legs]
    if min(lengths) <= 0.0:
        raise SimulationError("consecutive waypoints must differ")
    headings = [math.atan2(v[1], v[0]) for v in legs]

    turns, cuts = [], [0.0]
    for h_in, h_out in zip(headings, headings[1:]):
        turn = (h_out - h_in + math.pi) % (2.0 * math.pi) - math.pi
        turns.append(turn)
        cuts.append(fillet_radius * math.tan(abs(turn) / 2.0))
    cuts.append(0.0)

    segments = []
    for k, length in enumerate(lengths):
        straight = length - cuts[k] - cuts[k + 1]
        if straight < -1e-9:
            raise SimulationError("fillet radius too large for the waypoint spacing", leg=k)
        if straight > 0.0:
            segments.append((straight / speed, _forward(speed)))
        if k < len(turns) and abs(turns[k]) > 0.0:
            arc = fillet_radius * abs(turns[k])
            segments.append((arc / speed, _forward(speed, math.copysign(speed / fillet_radius, turns[k]))))
    segments.append((math.inf, _forward(speed)))

    rotation = Pose.from_yaw(headings[0]).rotation
    start = Pose(rotation, -rotation @ np.asarray(lever_arm, dtype=float))
    return SegmentPath(start, segments)


def build_path(path_cfg, speed, lever_arm):
    """
    Path whose receiver antenna sits at the ENU origin at the start, so that
    truth and estimator frames coincide when the first fix is exact.
    """
    yaw = math.radians(path_cfg.start_heading_deg)
    rotation = Pose.from_yaw(yaw).rotation
    start = Pose(rotation, -rotation @ np.asarray(lever_arm, dtype=float))
    if path_cfg.kind == "static" or speed == 0.0:
        return static_path(start)
    if path_cfg.kind == "loop":
        return loop_path(start, speed, path_cfg.radius, path_cfg.clockwise)
    if path_cfg.kind == "waypoints":
        return waypoint_path(path_cfg.waypoints, speed, path_cfg.fillet_radius, lever_arm)
    raise SimulationError("unknown path kind", kind=path_cfg.kind)
