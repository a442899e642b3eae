# odometry/gnss/simulator.py
"""
Synthetic GPS L1 observation generator.

For every epoch the true receiver position comes from the scripted path plus
the lever arm, and each visible satellite's phase, code and Doppler are built
from the exact geometric range and the error budget:

    phase  = (rho + c*dR - c*dS + E + T - I + m + noise) / lambda + N   [cycles]
    code   =  rho + c*dR - c*dS + E + T + I + m + noise                 [m]

All randomness is drawn from generators spawned off one seed, one stream per
error source, so identical seeds give identical output.
"""
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .atmosphere import DEFAULT_KLOBUCHAR, AtmosphereModel
from .constants import L1_WAVELENGTH, SPEED_OF_LIGHT
from .csvio import write_ground_truth, write_rel_pose
from .ephemeris import EphemerisStore, signal_emission_state, synthetic_constellation
from .exceptions import EphemerisError, SimulationError
from .frames import EnuFrame, azimuth_elevation, ecef_to_geodetic
from .lie import Pose, StateNode, hat, se3_exp
from .observations import GroundTruthSample, ObservationEpoch, RelPoseMeasurement, SatelliteObservation
from .paths import build_path
from .rinex import parse_rinex_nav, write_rinex_nav, write_rinex_obs

logger = logging.getLogger('odometry')

MIN_VISIBLE = 4
RELPOSE_TRANSLATION_FLOOR = 1e-4  # m
RELPOSE_ROTATION_FLOOR = 1e-5     # rad

_STREAMS = ("clock", "ambiguity", "slip", "multipath", "noise", "ephemeris", "relpose", "constellation")


@dataclass(frozen=True)
class PhaseComponents:
    """Truth decomposition of one simulated phase measurement, metres except ``ambiguity``."""

    geometric_range: float
    receiver_clock: float
    satellite_clock: float
    ephemeris: float
    tropo: float
    iono: float
    multipath: float
    noise: float
    outlier: float
    ambiguity: int


@dataclass
class SimulationResult:
    scenario: object
    budget: object
    frame: EnuFrame
    ephemerides: list
    klobuchar: object
    observations: list = field(default_factory=list)
    truth: list = field(default_factory=list)          # GroundTruthSample, receiver antenna
    states: list = field(default_factory=list)         # StateNode per observation epoch
    rel_poses: list = field(default_factory=list)
    components: list = field(default_factory=list)     # {sat_id: PhaseComponents} per epoch
    satellite_counts: list = field(default_factory=list)


class _SatelliteChannel:
    """Per-satellite tracking state: ambiguity, lock and correlated errors."""

    def __init__(self):
        self.ambiguity = 0
        self.last_seen = None
        self.code_multipath = 0.0
        self.phase_multipath = 0.0
        self.orbit_error = np.zeros(3)


class Simulator:
    def __init__(self, scenario, budget):
        self.scenario = scenario
        self.budget = budget
        seeds = np.random.SeedSequence(scenario.seed).spawn(len(_STREAMS))
        self.rng = {name: np.random.default_rng(s) for name, s in zip(_STREAMS, seeds)}

        self.frame = EnuFrame.from_geodetic(*scenario.origin_geodetic)
        self.lever = scenario.extrinsics.r_rv_v
        self.path = build_path(scenario.path, scenario.speed, self.lever)

        if scenario.constellation == "nav_file":
            if not scenario.nav_file:
                raise SimulationError("constellation 'nav_file' requires nav_file")
            self.ephemerides, klobuchar = parse_rinex_nav(scenario.nav_file)
            self.klobuchar = klobuchar or DEFAULT_KLOBUCHAR
        else:
            kwargs = {"sky_plot": scenario.sky_plot} if scenario.sky_plot else {}
            self.ephemerides = synthetic_constellation(
                scenario.origin_geodetic, scenario.start, rng=self.rng["constellation"], **kwargs)
            self.klobuchar = DEFAULT_KLOBUCHAR
        self.store = EphemerisStore(self.ephemerides)

        self.truth_atmosphere = AtmosphereModel(
            klobuchar=self.klobuchar,
            use_iono=budget.apply_iono,
            use_tropo=budget.apply_tropo,
            iono_scale=budget.iono_scale,
            tropo_scale=budget.tropo_scale,
        )
        self.channels = {sat: _SatelliteChannel() for sat in self.store.satellites}
        for channel in self.channels.values():
            if budget.apply_eph_error:
                channel.orbit_error = self.rng["ephemeris"].normal(0.0, budget.eph_error_sigma, 3)
            if budget.apply_multipath:
                channel.code_multipath = self.rng["multipath"].normal(0.0, budget.multipath_code_sigma)
                channel.phase_multipath = self.rng["multipath"].normal(0.0, budget.multipath_phase_sigma)
        self.clock_bias = budget.receiver_clock_bias

    # --------------------------------------------------------------------------

    def epoch_times(self):
        count = int(math.floor(self.scenario.duration * self.scenario.epoch_rate + 1e-9))
        return [k / self.scenario.epoch_rate for k in range(count + 1)]

    def receiver_state(self, elapsed):
        """Receiver ENU position and velocity, plus the vehicle StateNode."""
        pose, twist = self.path.state(elapsed)
        position = pose.act(self.lever)
        velocity = receiver_velocity(pose, twist, self.lever)
        return position, velocity, pose, twist

    def _visible(self, t, receiver_ecef, receiver_enu):
        geometry = []
        for sat_id in self.store.satellites:
            try:
                eph = self.store.select(sat_id, t)
                emission = signal_emission_state(eph, t, receiver_ecef)
            except EphemerisError:
                continue
            los = self.frame.to_enu(emission.position) - receiver_enu
            az, el = azimuth_elevation(los)
            if el < self.scenario.mask_angle:
                continue
            if any(wall.blocks(receiver_enu, az, el) for wall in self.scenario.obstructions):
                continue
            geometry.append((sat_id, emission, az, el))
        return geometry

    def _apply_dropouts(self, elapsed, geometry):
        for window in self.scenario.dropout_windows:
            if window.covers(elapsed):
                ranked = sorted(geometry, key=lambda g: (-g[3], g[0]))
                return sorted(ranked[:window.surviving_sat_count], key=lambda g: g[0])
        return geometry

    def _step_multipath(self, channel, dt):
        b = self.budget
        if not b.apply_multipath:
            return
        a = math.exp(-dt / b.multipath_tau)
        scale = math.sqrt(1.0 - a * a)
        rng = self.rng["multipath"]
        channel.code_multipath = a * channel.code_multipath + scale * rng.normal(0.0, b.multipath_code_sigma)
        channel.phase_multipath = a * channel.phase_multipath + scale * rng.normal(0.0, b.multipath_phase_sigma)

    def _new_ambiguity(self):
        if not self.budget.ambiguities:
            return 0
        span = self.budget.ambiguity_range
        return int(self.rng["ambiguity"].integers(-span, span + 1))

    def _outlier(self, elapsed, sat_id):
        half = 0.5 / self.scenario.epoch_rate
        return sum(o.magnitude_m for o in self.scenario.phase_outliers
                   if o.sat_id == sat_id and abs(o.time - elapsed) < half)

    # --------------------------------------------------------------------------

    def run(self):
        scenario, budget = self.scenario, self.budget
        result = SimulationResult(scenario, budget, self.frame, self.ephemerides, self.klobuchar)
        dt = 1.0 / scenario.epoch_rate
        previous_elapsed = None
        dropout_active = False

        for k, elapsed in enumerate(self.epoch_times()):
            t = scenario.start + elapsed
            if previous_elapsed is not None:
                step = elapsed - previous_elapsed
                self.clock_bias += budget.receiver_clock_drift * step
                if budget.receiver_clock_rw > 0.0:
                    self.clock_bias += self.rng["clock"].normal(0.0, budget.receiver_clock_rw * math.sqrt(step))

            position, velocity, pose, twist = self.receiver_state(elapsed)
            receiver_ecef = self.frame.to_ecef(position)
            receiver_geodetic = ecef_to_geodetic(receiver_ecef)
            velocity_ecef = self.frame.vector_to_ecef(velocity)

            geometry = self._visible(t, receiver_ecef, position)
            in_dropout = any(w.covers(elapsed) for w in scenario.dropout_windows)
            if in_dropout != dropout_active:
                logger.info(f"Dropout {'starts' if in_dropout else 'ends'} at t+{elapsed:.1f}s.")
                dropout_active = in_dropout
            if not in_dropout and len(geometry) < MIN_VISIBLE:
                raise SimulationError("fewer than four satellites visible outside a dropout",
                                      elapsed=elapsed, visible=len(geometry))
            geometry = self._apply_dropouts(elapsed, geometry)

            records, components = [], {}
            for sat_id, emission, az, el in geometry:
                channel = self.channels[sat_id]
                reacquired = channel.last_seen is None or channel.last_seen != k - 1
                slipped = (not reacquired and budget.cycle_slip_rate > 0.0
                           and self.rng["slip"].random() < budget.cycle_slip_rate * dt / 60.0)
                if reacquired or slipped:
                    channel.ambiguity = self._new_ambiguity()
                    if slipped:
                        logger.debug(f"Cycle slip on {sat_id} at t+{elapsed:.1f}s.")
                elif channel.last_seen is not None:
                    self._step_multipath(channel, dt)
                lock_lost = slipped or (reacquired and channel.last_seen is not None)
                channel.last_seen = k

                true_sat = emission.position + channel.orbit_error
                rho = float(np.linalg.norm(emission.position - receiver_ecef))
                rho_true = float(np.linalg.norm(true_sat - receiver_ecef))
                u = (emission.position - receiver_ecef) / rho
                slant = self.truth_atmosphere.slant(receiver_geodetic, az, el, t)

                noise = self.rng["noise"]
                phase_noise = noise.normal(0.0, budget.phase_noise_sigma) if budget.phase_noise_sigma else 0.0
                code_noise = noise.normal(0.0, budget.pseudorange_noise_sigma) if budget.pseudorange_noise_sigma else 0.0
                doppler_noise = noise.normal(0.0, budget.doppler_noise_sigma) if budget.doppler_noise_sigma else 0.0

                parts = PhaseComponents(
                    geometric_range=rho,
                    receiver_clock=SPEED_OF_LIGHT * self.clock_bias,
                    satellite_clock=-SPEED_OF_LIGHT * emission.clock_bias,
                    ephemeris=rho_true - rho,
                    tropo=slant.tropo,
                    iono=slant.iono,
                    multipath=channel.phase_multipath,
                    noise=phase_noise,
                    outlier=self._outlier(elapsed, sat_id),
                    ambiguity=channel.ambiguity,
                )
                common = rho_true + parts.receiver_clock + parts.satellite_clock + slant.tropo
                phase_m = common - slant.iono + parts.multipath + phase_noise + parts.outlier
                code = common + slant.iono + channel.code_multipath + code_noise
                range_rate = float(u @ (emission.velocity - velocity_ecef))
                range_rate += SPEED_OF_LIGHT * (budget.receiver_clock_drift - emission.clock_drift)

                records.append(SatelliteObservation(
                    sat_id=sat_id,
                    phase=phase_m / L1_WAVELENGTH + channel.ambiguity,
                    pseudorange=code,
                    doppler=-(range_rate + doppler_noise) / L1_WAVELENGTH,
                    snr=round(35.0 + 15.0 * math.sin(el), 2),
                    lock_lost=lock_lost,
                ))
                components[sat_id] = parts

            result.states.append(StateNode(t, pose, twist))
            result.components.append(components)
            result.satellite_counts.append(len(records))
            if records:
                result.observations.append(ObservationEpoch(t, tuple(records)))
            previous_elapsed = elapsed

        result.truth = self._truth_samples()
        result.rel_poses = self._rel_poses(result.states)
        counts = result.satellite_counts
        logger.info(f"Simulated {len(result.observations)} epochs for '{scenario.name}' "
                    f"(seed {scenario.seed}); satellites min/median/max "
                    f"{min(counts)}/{int(np.median(counts))}/{max(counts)}.")
        return result

    def _truth_samples(self):
        count = int(math.floor(self.scenario.duration * self.scenario.truth_rate + 1e-9))
        samples = []
        for k in range(count + 1):
            elapsed = k / self.scenario.truth_rate
            position, *_ = self.receiver_state(elapsed)
            samples.append(GroundTruthSample(self.scenario.start + elapsed, position, 1))
        return samples

    def _rel_poses(self, states):
        """Stand-in visual odometry: noisy, scale-biased relative poses between epochs."""
        b = self.budget
        rng = self.rng["relpose"]
        sigma = np.array([b.relpose_translation_sigma] * 3 + [b.relpose_rotation_sigma] * 3)
        measurements = []
        for a, c in zip(states, states[1:]):
            true_ab = a.pose.inverse() @ c.pose
            step = float(np.linalg.norm(true_ab.translation))
            biased = Pose(true_ab.rotation, (1.0 + b.relpose_drift) * true_ab.translation)
            noise = rng.normal(0.0, 1.0, 6) * sigma
            reported = np.concatenate([
                np.full(3, max(math.hypot(b.relpose_translation_sigma, b.relpose_drift * step),
                               RELPOSE_TRANSLATION_FLOOR)),
                np.full(3, max(b.relpose_rotation_sigma, RELPOSE_ROTATION_FLOOR)),
            ])
            measurements.append(RelPoseMeasurement(
                a.t, c.t, biased @ se3_exp(noise), np.diag(reported ** 2)))
        return measurements


def simulate(scenario, budget):
    """Run one scenario; see ``SimulationResult`` for the products."""
    return Simulator(scenario, budget).run()


def receiver_velocity(pose, twist, lever):
    """ENU velocity of a point rigidly attached at ``lever`` in the body frame."""
    return pose.rotation @ (twist[:3] - hat(lever) @ twist[3:])


def write_simulation(result, out_dir):
    """Write obs, nav, truth and rel-pose files; returns the paths written."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {
        "obs": out / "observations.obs",
        "nav": out / "navigation.nav",
        "truth": out / "truth.csv",
        "rel_pose": out / "rel_pose.csv",
    }
    write_rinex_obs(result.observations, paths["obs"], approx_position=result.frame.origin_ecef,
                    interval=1.0 / result.scenario.epoch_rate, marker=result.scenario.name[:60])
    write_rinex_nav(result.ephemerides, paths["nav"], klobuchar=result.klobuchar)
    write_ground_truth(result.truth, paths["truth"])
    write_rel_pose(result.rel_poses, paths["rel_pose"])
    return paths
