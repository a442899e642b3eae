# odometry/gnss/pipeline.py
"""
Forward-only TDCP odometry over a sliding window of once-per-second vertices.

Each new epoch becomes a StateNode predicted with constant twist, tied to the
previous node by the motion prior and to earlier in-window nodes by TDCP
factors between satellites that kept phase lock. The window is re-solved with
Dogleg after every epoch and the newest node's estimate is reported once and
never revised.
"""
import logging
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .atmosphere import AtmosphereModel, SlantDelay, differenced_atmo_correction
from .baselines import doppler_velocity, initial_heading, pseudorange_fix
from .config import GraphConfig, Topology
from .constants import NANOS_IN_SECOND, SPEED_OF_LIGHT
from .ephemeris import EphemerisStore, signal_emission_state
from .exceptions import BaselineError, EphemerisError, InitializationError
from .factors import (
    AttitudePriorFactor,
    MotionPriorFactor,
    NonholonomicFactor,
    PositionPriorFactor,
    RelPoseFactor,
    TdcpFactor,
    TdcpPairMeasurement,
    TwistPriorFactor,
)
from .frames import EnuFrame, GpsTime, azimuth_elevation, ecef_to_geodetic
from .lie import Pose, StateNode, Trajectory, check_twist_bounds
from .observations import RelPoseMeasurement
from .solver import solve_window

logger = logging.getLogger('odometry')

MIN_INIT_SATELLITES = 4
INITIAL_TWIST_SIGMA = (1.0, 1.0, 1.0, 0.5, 0.5, 0.5)
TIME_MATCH_TOLERANCE = 1e-3  # s


def round_to_vertex(t):
    """Nearest whole GPS second."""
    whole = (t.nanos + NANOS_IN_SECOND // 2) // NANOS_IN_SECOND * NANOS_IN_SECOND
    return GpsTime._normalized(t.week, whole)


class PhaseLockTracker:
    """
    Start of the current continuous phase arc for each satellite.

    An arc restarts when the receiver flags lost lock, when the phase is
    missing or when the satellite was absent at the previous epoch.
    """

    def __init__(self):
        self.arc_start = {}
        self.last_seen = {}

    def update(self, index, epoch):
        for record in epoch:
            if not record.has_phase:
                self.arc_start.pop(record.sat_id, None)
                self.last_seen.pop(record.sat_id, None)
                continue
            continuous = self.last_seen.get(record.sat_id) == index - 1
            if record.lock_lost or not continuous or record.sat_id not in self.arc_start:
                if record.lock_lost and continuous:
                    logger.info(f"Lock lost on {record.sat_id} at {epoch.t}.")
                self.arc_start[record.sat_id] = index
            self.last_seen[record.sat_id] = index
        for sat_id in [s for s, seen in self.last_seen.items() if seen != index]:
            del self.last_seen[sat_id]
            self.arc_start.pop(sat_id, None)

    def eligible(self, sat_id, index_a, index_b):
        """True when ``sat_id`` tracked phase continuously from ``index_a`` to ``index_b``."""
        start = self.arc_start.get(sat_id)
        return (start is not None and start <= index_a
                and self.last_seen.get(sat_id) == index_b)


@dataclass
class SatelliteView:
    """Estimator-side geometry of one satellite at one epoch (ENU frame)."""

    position: np.ndarray
    elevation: float
    phase: float          # m
    clock_bias: float     # s
    slant: SlantDelay


@dataclass
class EpochState:
    key: int
    index: int
    t: GpsTime
    views: dict = field(default_factory=dict)


@dataclass(frozen=True)
class EpochDiagnostics:
    t: GpsTime
    satellites: int
    tdcp_factors: int
    iterations: int
    cost: float
    termination: str
    window_nodes: int


class TdcpOdometry:
    """One estimation run; not reusable across datasets."""

    def __init__(self, ephemerides, config=None, klobuchar=None, rel_poses=()):
        self.config = config or GraphConfig()
        self.store = ephemerides if isinstance(ephemerides, EphemerisStore) else EphemerisStore(ephemerides)
        self.atmosphere = AtmosphereModel(klobuchar=klobuchar, use_iono=self.config.use_iono,
                                          use_tropo=self.config.use_tropo)
        self.lever = np.asarray(self.config.lever_arm, dtype=float)
        self.rel_poses = sorted(rel_poses, key=lambda m: m.t_a) if self.config.use_rel_pose_factors else []

        self.frame = None
        self.tracker = PhaseLockTracker()
        self.nodes = {}        # key -> StateNode, current window
        self.epochs = {}       # key -> EpochState
        self.factors = []
        self.fixed = set()
        self.history = []      # reported StateNodes, one per vertex
        self.diagnostics = []
        self._next_key = 0
        self._index = 0

    # --------------------------------------------------------------------------
    # INITIALIZATION
    # --------------------------------------------------------------------------

    def initialize(self, epochs):
        """
        Anchor the ENU frame at the first pseudorange fix and create the first
        node with the receiver at the origin, heading from Doppler (or from the
        second fix), plus position, attitude and twist priors.
        """
        epochs = list(epochs)
        if not epochs:
            raise InitializationError("cannot initialize without epochs")
        first = epochs[0]
        if len(first.with_pseudoranges()) < MIN_INIT_SATELLITES:
            raise InitializationError("cannot initialize: fewer than four satellites with pseudoranges",
                                      satellites=len(first.with_pseudoranges()))
        try:
            fix = pseudorange_fix(first, self.store, atmosphere=self.atmosphere,
                                  elevation_mask=self.config.elevation_mask)
        except BaselineError as exc:
            raise InitializationError(f"cannot initialize: {exc.message}", **exc.details) from exc
        self.frame = EnuFrame.from_ecef(fix.ecef)

        yaw, speed, yaw_rate = self._bootstrap_heading(epochs, fix)
        rotation = Pose.from_yaw(yaw).rotation
        pose = Pose(rotation, -rotation @ self.lever)
        twist = np.array([speed, 0.0, 0.0, 0.0, 0.0, yaw_rate])
        t = round_to_vertex(first.t)
        node = StateNode(t, pose, twist)

        key = self._add_node(node, first)
        self.factors += [
            PositionPriorFactor(key, np.zeros(3), self.config.position_prior_sigma, self.lever),
            AttitudePriorFactor(key, rotation, self.config.attitude_prior_sigma),
            TwistPriorFactor(key, twist, INITIAL_TWIST_SIGMA),
            NonholonomicFactor(key, self.config.nonholonomic_sigma),
        ]
        self.history.append(node)
        self.diagnostics.append(EpochDiagnostics(t, len(self.epochs[key].views), 0, 0, 0.0, "initial", 1))
        logger.info(f"Initialized at {t}: {fix.satellites} satellites, yaw {math.degrees(yaw):.1f} deg, "
                    f"speed {speed:.2f} m/s.")
        return node, self.frame

    def _bootstrap_heading(self, epochs, fix):
        velocities = []
        for epoch in epochs[:2]:
            try:
                v = doppler_velocity(epoch, self.store, fix.ecef)
                velocities.append((epoch.t, self.frame.vector_to_enu(v.ecef)))
            except BaselineError:
                break
        if velocities and math.hypot(*velocities[0][1][:2]) > 0.2:
            yaw_rate = 0.0
            if len(velocities) == 2 and math.hypot(*velocities[1][1][:2]) > 0.2:
                dt = velocities[1][0] - velocities[0][0]
                turn = (math.atan2(velocities[1][1][1], velocities[1][1][0])
                        - math.atan2(velocities[0][1][1], velocities[0][1][0]))
                yaw_rate = ((turn + math.pi) % (2.0 * math.pi) - math.pi) / dt
            yaw, speed = initial_heading(velocities[0][1], yaw_rate, self.lever)
            return yaw, speed, yaw_rate
        if len(epochs) > 1:
            try:
                second = pseudorange_fix(epochs[1], self.store, atmosphere=self.atmosphere,
                                         approx=fix.ecef, elevation_mask=self.config.elevation_mask)
                d = self.frame.to_enu(second.ecef)
                if math.hypot(d[0], d[1]) > 0.2 * (epochs[1].t - epochs[0].t):
                    return math.atan2(d[1], d[0]), 0.0, 0.0
            except BaselineError:
                pass
        return 0.0, 0.0, 0.0

    # --------------------------------------------------------------------------
    # PER-EPOCH UPDATE
    # --------------------------------------------------------------------------

    def _views(self, epoch, receiver_enu):
        receiver = self.frame.to_ecef(receiver_enu)
        user = ecef_to_geodetic(receiver)
        views = {}
        for record in epoch:
            if not record.has_phase:
                continue
            try:
                eph = self.store.select(record.sat_id, epoch.t)
                emission = signal_emission_state(eph, epoch.t, receiver)
            except EphemerisError:
                continue
            position = self.frame.to_enu(emission.position)
            az, el = azimuth_elevation(position - receiver_enu)
            if el < self.config.elevation_mask:
                continue
            views[record.sat_id] = SatelliteView(
                position=position,
                elevation=el,
                phase=record.phase_range,
                clock_bias=emission.clock_bias,
                slant=self.atmosphere.slant(user, az, el, epoch.t),
            )
        return views

    def _add_node(self, node, epoch):
        key = self._next_key
        self._next_key += 1
        self.nodes[key] = node
        self.tracker.update(self._index, epoch)
        state = EpochState(key, self._index, node.t, self._views(epoch, node.receiver_position(self.lever)))
        self.epochs[key] = state
        self._index += 1
        return key

    def _weight(self, elevation):
        sigma = self.config.phase_dd_sigma
        if self.config.elevation_weighting:
            sigma /= max(math.sin(elevation), 0.1)
        return 1.0 / sigma ** 2

    def pair_measurements(self, state_a, state_b):
        """TDCP measurements between two epochs against the highest common satellite."""
        common = [sat for sat in state_b.views
                  if sat in state_a.views and self.tracker.eligible(sat, state_a.index, state_b.index)]
        if len(common) < 2:
            return []
        ref = min(common, key=lambda s: (-state_a.views[s].elevation, s))
        receiver_a = self.nodes[state_a.key].receiver_position(self.lever)
        ra, rb = state_a.views[ref], state_b.views[ref]

        measurements = []
        for sat in sorted(common):
            if sat == ref:
                continue
            oa, ob = state_a.views[sat], state_b.views[sat]
            phase_dd = (ob.phase - oa.phase) - (rb.phase - ra.phase)
            clock_dd = (ob.clock_bias - oa.clock_bias) - (rb.clock_bias - ra.clock_bias)
            measurements.append(TdcpPairMeasurement(
                t_a=state_a.t, t_b=state_b.t, ref_sat=ref, other_sat=sat,
                phase_dd=phase_dd + SPEED_OF_LIGHT * clock_dd,
                ref_a=ra.position, ref_b=rb.position, other_a=oa.position, other_b=ob.position,
                u_ref=ra.position - receiver_a, u_other=oa.position - receiver_a,
                atmo_dd=differenced_atmo_correction(ra.slant, rb.slant, oa.slant, ob.slant),
                weight=self._weight(min(ra.elevation, oa.elevation)),
            ))
        return measurements

    def _rel_pose_between(self, t_a, t_b):
        """
        Relative pose from ``t_a`` to ``t_b``, composing consecutive
        measurements when epochs were skipped (e.g. across a dropout).
        """
        chain, t = [], t_a
        for m in self.rel_poses:
            if abs(m.t_a - t) > TIME_MATCH_TOLERANCE:
                continue
            chain.append(m)
            t = m.t_b
            if abs(t - t_b) <= TIME_MATCH_TOLERANCE:
                break
            if t - t_b > TIME_MATCH_TOLERANCE:
                return None
        if not chain or abs(t - t_b) > TIME_MATCH_TOLERANCE:
            return None
        if len(chain) == 1:
            return chain[0]
        T, cov = chain[0].T_ab, chain[0].covariance
        for m in chain[1:]:
            # Right perturbations of the earlier link are carried through the later one.
            ad = m.T_ab.inverse().adjoint()
            cov = ad @ cov @ ad.T + m.covariance
            T = T @ m.T_ab
        return RelPoseMeasurement(chain[0].t_a, chain[-1].t_b, T, 0.5 * (cov + cov.T))

    def add_epoch(self, epoch):
        """Add one epoch, re-solve the window and return the frozen estimate for it."""
        if self.frame is None:
            raise InitializationError("add_epoch called before initialize")
        t = round_to_vertex(epoch.t)
        previous_key = max(self.nodes)
        previous = self.nodes[previous_key]
        if not t > previous.t:
            logger.debug(f"Epoch {epoch.t} maps onto vertex {t} already in use; skipped.")
            return None

        if check_twist_bounds(previous.twist):
            predicted = previous.extrapolate(t)
        else:
            logger.warning(f"Twist at {previous.t} is out of bounds; predicting {t} from rest.")
            predicted = StateNode(t, previous.pose, np.zeros(6))
        key = self._add_node(predicted, epoch)
        state_b = self.epochs[key]
        cfg = self.config

        self.factors.append(MotionPriorFactor(previous_key, key, t - previous.t, cfg.qc))
        self.factors.append(NonholonomicFactor(key, cfg.nonholonomic_sigma))
        anchors = ([previous_key] if cfg.tdcp_topology is Topology.CONSECUTIVE
                   else sorted(k for k in self.nodes if k != key))
        paired = [(anchor, self.pair_measurements(self.epochs[anchor], state_b)) for anchor in anchors]
        paired = [(anchor, ms) for anchor, ms in paired if ms]
        # The new epoch's phase enters every pair, so its weight is shared among the anchors.
        tdcp = 0
        for anchor, measurements in paired:
            for m in measurements:
                if len(paired) > 1:
                    m = replace(m, weight=m.weight / len(paired))
                self.factors.append(TdcpFactor(anchor, key, m, self.lever, cfg.dcs_phi))
                tdcp += 1
        rel_pose = self._rel_pose_between(previous.t, t) if self.rel_poses else None
        if rel_pose is not None:
            self.factors.append(RelPoseFactor(previous_key, key, rel_pose))

        self._slide(t)
        result = solve_window(self.nodes, self.factors, cfg.solver, fixed_keys=self.fixed)
        self.nodes = dict(result.nodes)

        estimate = self.nodes[key]
        self.history.append(estimate)
        self.diagnostics.append(EpochDiagnostics(
            t, len(state_b.views), tdcp, result.iterations, result.cost, result.termination, len(self.nodes)))
        logger.debug(f"Epoch {t}: {len(state_b.views)} satellites, {tdcp} TDCP factors, "
                     f"{result.iterations} iterations ({result.termination}).")
        return estimate

    def _slide(self, newest):
        """Drop nodes older than the window; the newest node's predecessor always stays."""
        keep = set(sorted(self.nodes)[-2:])
        expired = [k for k, node in self.nodes.items()
                   if k not in keep and newest - node.t > self.config.window_length + 1e-9]
        if not expired:
            return
        for k in expired:
            del self.nodes[k]
            del self.epochs[k]
        live = set(self.nodes)
        self.factors = [f for f in self.factors if set(f.keys) <= live]
        self.fixed = {min(self.nodes)}

    # --------------------------------------------------------------------------

    def run(self, epochs):
        epochs = list(epochs)
        self.initialize(epochs[:2])
        for epoch in epochs[1:]:
            self.add_epoch(epoch)
        return self.trajectory()

    def trajectory(self):
        """Vehicle-frame estimates as reported, one node per vertex."""
        return Trajectory(self.history)


def estimate_trajectory(epochs, ephemerides, config=None, klobuchar=None, rel_poses=()):
    """Convenience wrapper: run a fresh ``TdcpOdometry`` over ``epochs``."""
    odometry = TdcpOdometry(ephemerides, config=config, klobuchar=klobuchar, rel_poses=rel_poses)
    odometry.run(epochs)
    return odometry
