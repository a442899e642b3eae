# odometry/gnss/baselines.py
"""
Single-receiver comparison methods: pseudorange trilateration, integrated
Doppler velocity and relative-pose dead reckoning.
"""
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .constants import L1_WAVELENGTH, SPEED_OF_LIGHT
from .ephemeris import signal_emission_state
from .exceptions import BaselineError, EphemerisError, GeodesyError
from .frames import EnuFrame, azimuth_elevation
from .lie import Pose, StateNode, Trajectory

logger = logging.getLogger('odometry')

MIN_SATELLITES = 4
FIX_MAX_ITER = 20
FIX_STEP_TOLERANCE = 1e-4   # m
NEAR_SURFACE_HEIGHT = 1.0e4  # m, ellipsoidal; above it no mask or atmosphere is applied


@dataclass(frozen=True, eq=False)
class PseudorangeFix:
    ecef: np.ndarray
    clock_bias: float      # m
    satellites: int
    iterations: int
    residual_rms: float

    def to_enu(self, frame):
        return frame.to_enu(self.ecef)


@dataclass(frozen=True, eq=False)
class VelocityFix:
    ecef: np.ndarray       # receiver velocity, m/s
    clock_drift: float     # m/s
    satellites: int


@dataclass
class BaselineRun:
    """A baseline trajectory (receiver positions) plus the epochs it had to bridge."""

    method: str
    trajectory: Trajectory
    flagged: list = field(default_factory=list)


def _emission_geometry(epoch_time, sat_ids, store, receiver):
    """(sat_id, EmissionState) for every satellite with a usable ephemeris."""
    geometry = []
    for sat_id in sat_ids:
        try:
            eph = store.select(sat_id, epoch_time)
        except EphemerisError:
            continue
        geometry.append((sat_id, signal_emission_state(eph, epoch_time, receiver)))
    return geometry


def _local_frame(position):
    """ENU frame at ``position`` while the iterate is a plausible ground receiver, else None."""
    try:
        frame = EnuFrame.from_ecef(position)
    except GeodesyError:
        return None
    return frame if abs(frame.height) < NEAR_SURFACE_HEIGHT else None


def pseudorange_fix(epoch, store, atmosphere=None, approx=None, elevation_mask=0.0):
    """
    Iterated least squares over (x, y, z, c*dR) in ECEF.

    Emission time, Sagnac and satellite clock are always applied; tropospheric
    and ionospheric corrections only when ``atmosphere`` is given.
    """
    records = {r.sat_id: r for r in epoch.with_pseudoranges()}
    if len(records) < MIN_SATELLITES:
        raise BaselineError("fewer than four pseudoranges", satellites=len(records), time=str(epoch.t))

    x = np.zeros(4)
    if approx is not None:
        x[:3] = approx
    for iteration in range(1, FIX_MAX_ITER + 1):
        frame = _local_frame(x[:3])
        user = frame.origin_geodetic if frame is not None else None

        rows, residuals = [], []
        for sat_id, emission in _emission_geometry(epoch.t, sorted(records), store, x[:3]):
            los = emission.position - x[:3]
            rho = float(np.linalg.norm(los))
            predicted = rho + x[3] - SPEED_OF_LIGHT * emission.clock_bias
            if frame is not None:
                az, el = azimuth_elevation(frame.vector_to_enu(los))
                if el < elevation_mask:
                    continue
                if atmosphere is not None and el > 0.05:
                    slant = atmosphere.slant(user, az, el, epoch.t)
                    predicted += slant.tropo + slant.iono
            rows.append(np.concatenate([-los / rho, [1.0]]))
            residuals.append(records[sat_id].pseudorange - predicted)

        if len(rows) < MIN_SATELLITES:
            raise BaselineError("fewer than four usable satellites", satellites=len(rows),
                                time=str(epoch.t))
        A, r = np.array(rows), np.array(residuals)
        dx, *_ = np.linalg.lstsq(A, r, rcond=None)
        x = x + dx
        if not np.all(np.isfinite(x)):
            break
        if np.linalg.norm(dx[:3]) < FIX_STEP_TOLERANCE:
            rms = float(np.sqrt(np.mean((r - A @ dx) ** 2)))
            return PseudorangeFix(x[:3].copy(), float(x[3]), len(rows), iteration, rms)
    raise BaselineError("pseudorange solution did not converge", time=str(epoch.t))


def doppler_velocity(epoch, store, receiver_ecef):
    """Receiver ECEF velocity and clock drift from Doppler, by linear least squares."""
    geometry = _emission_geometry(epoch.t, [r.sat_id for r in epoch if r.has_doppler], store, receiver_ecef)
    if len(geometry) < MIN_SATELLITES:
        raise BaselineError("fewer than four Doppler measurements", satellites=len(geometry),
                            time=str(epoch.t))
    rows, values = [], []
    for sat_id, emission in geometry:
        los = emission.position - receiver_ecef
        u = los / np.linalg.norm(los)
        range_rate = -L1_WAVELENGTH * epoch.get(sat_id).doppler
        rows.append(np.concatenate([-u, [1.0]]))
        values.append(range_rate - u @ emission.velocity + SPEED_OF_LIGHT * emission.clock_drift)
    solution, *_ = np.linalg.lstsq(np.array(rows), np.array(values), rcond=None)
    return VelocityFix(solution[:3], float(solution[3]), len(rows))


def pseudorange_odometry(epochs, store, frame=None, atmosphere=None):
    """Independent pseudorange fixes per epoch, expressed in ENU."""
    nodes, flagged = [], []
    for epoch in epochs:
        try:
            fix = pseudorange_fix(epoch, store, atmosphere=atmosphere,
                                  approx=None if frame is None else frame.origin_ecef)
        except BaselineError as exc:
            logger.info(f"Skipping pseudorange epoch {epoch.t}: {exc.message}.")
            flagged.append(epoch.t)
            continue
        if frame is None:
            frame = EnuFrame.from_ecef(fix.ecef)
        nodes.append(StateNode(epoch.t, Pose(np.eye(3), fix.to_enu(frame))))
    if not nodes:
        raise BaselineError("no epoch produced a pseudorange fix")
    return BaselineRun("pseudorange", Trajectory(nodes), flagged)


def doppler_odometry(epochs, store, frame=None, atmosphere=None):
    """
    Trapezoidal integration of Doppler velocities from the first pseudorange fix.

    Epochs with too few Doppler measurements reuse the last velocity and are
    flagged.
    """
    epochs = list(epochs)
    if not epochs:
        raise BaselineError("no epochs to integrate")
    start = pseudorange_fix(epochs[0], store, atmosphere=atmosphere)
    frame = frame or EnuFrame.from_ecef(start.ecef)

    position = start.to_enu(frame)
    velocity = None
    nodes, flagged = [], []
    previous_t = None
    for epoch in epochs:
        try:
            fix = doppler_velocity(epoch, store, frame.to_ecef(position))
            current = frame.vector_to_enu(fix.ecef)
        except BaselineError:
            if velocity is None:
                raise
            current = velocity
            flagged.append(epoch.t)
            logger.info(f"Doppler epoch {epoch.t} held the last velocity.")
        if previous_t is not None:
            position = position + 0.5 * (velocity + current) * (epoch.t - previous_t)
        velocity = current
        previous_t = epoch.t
        nodes.append(StateNode(epoch.t, Pose(np.eye(3), position.copy()),
                               np.concatenate([current, np.zeros(3)])))
    return BaselineRun("doppler", Trajectory(nodes), flagged)


def relative_pose_odometry(measurements, initial_pose, lever_arm=(0.0, 0.0, 0.0)):
    """Compose relative poses from ``initial_pose``; returns receiver-antenna positions."""
    measurements = sorted(measurements, key=lambda m: m.t_a)
    if not measurements:
        raise BaselineError("no relative-pose measurements")
    pose = initial_pose
    vehicle = [StateNode(measurements[0].t_a, pose)]
    for previous, m in zip([None] + measurements[:-1], measurements):
        if previous is not None and abs(m.t_a - previous.t_b) > 1e-3:
            raise BaselineError("relative poses do not chain", gap_at=str(m.t_a))
        pose = pose @ m.T_ab
        vehicle.append(StateNode(m.t_b, pose))
    return BaselineRun("relpose", Trajectory(vehicle).receiver_frame(lever_arm))


def initial_heading(velocity_enu, yaw_rate=0.0, lever_arm=(0.0, 0.0, 0.0), min_speed=0.2):
    """
    Vehicle yaw and forward speed from the antenna's horizontal velocity, or
    ``None`` below ``min_speed``. A known yaw rate removes the lever-arm swing.
    """
    ve, vn = velocity_enu[0], velocity_enu[1]
    horizontal = math.hypot(ve, vn)
    if horizontal <= min_speed:
        return None
    lx, ly = lever_arm[0], lever_arm[1]
    lateral = yaw_rate * lx
    forward = math.sqrt(max(horizontal ** 2 - lateral ** 2, 0.0))
    yaw = math.atan2(vn, ve) - math.atan2(lateral, forward)
    return yaw, forward + yaw_rate * ly
