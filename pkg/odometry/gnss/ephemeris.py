# odometry/gnss/ephemeris.py
"""
GPS broadcast-ephemeris propagation.

Satellites move at roughly 3.9 km/s, so their state is recomputed for every
measurement epoch rather than cached per run.
"""
import logging
import math
from collections import defaultdict
from dataclasses import dataclass

import numpy as np

from .constants import (
    EPHEMERIS_VALIDITY,
    GM_EARTH,
    OMEGA_EARTH,
    RELATIVISTIC_F,
    SPEED_OF_LIGHT,
)
from .exceptions import EphemerisError, KeplerConvergenceError, StaleEphemerisError
from .frames import geodetic_to_ecef, enu_rotation

logger = logging.getLogger('odometry')

KEPLER_TOLERANCE = 1e-13
KEPLER_MAX_ITER = 30
NOMINAL_TRAVEL_TIME = 0.075  # s, initial guess for the light-time iteration


@dataclass(frozen=True)
class BroadcastEphemeris:
    """Quasi-Keplerian elements and clock polynomial for one satellite."""

    sat_id: str
    toe: object
    toc: object
    sqrt_a: float
    e: float
    i0: float
    omega0: float
    omega: float
    m0: float
    delta_n: float = 0.0
    idot: float = 0.0
    omega_dot: float = 0.0
    cuc: float = 0.0
    cus: float = 0.0
    crc: float = 0.0
    crs: float = 0.0
    cic: float = 0.0
    cis: float = 0.0
    af0: float = 0.0
    af1: float = 0.0
    af2: float = 0.0
    iode: float = 0.0
    tgd: float = 0.0
    health: float = 0.0

    def __post_init__(self):
        if not 0.0 <= self.e <= 0.05:
            raise EphemerisError("eccentricity outside [0, 0.05]", sat_id=self.sat_id, e=self.e)
        if not 5000.0 <= self.sqrt_a <= 5500.0:
            raise EphemerisError("sqrt(A) outside the GPS range", sat_id=self.sat_id,
                                 sqrt_a=self.sqrt_a)
        if abs(self.af0) >= 1e-3:
            raise EphemerisError("clock bias af0 implausibly large", sat_id=self.sat_id,
                                 af0=self.af0)


@dataclass(frozen=True, eq=False)
class SatelliteState:
    position: np.ndarray
    velocity: np.ndarray
    clock_bias: float
    clock_drift: float


@dataclass(frozen=True, eq=False)
class EmissionState:
    position: np.ndarray      # ECEF at emission, expressed in the ECEF frame at reception
    velocity: np.ndarray
    clock_bias: float
    clock_drift: float
    travel_time: float


def solve_kepler(mean_anomaly, e):
    """Newton iteration on M = E - e sin E."""
    E = mean_anomaly
    for _ in range(KEPLER_MAX_ITER):
        step = (E - e * math.sin(E) - mean_anomaly) / (1.0 - e * math.cos(E))
        E -= step
        if abs(step) < KEPLER_TOLERANCE:
            return E
    raise KeplerConvergenceError("Kepler's equation did not converge",
                                 mean_anomaly=mean_anomaly, e=e)


def sat_state(eph, t, relativity=True):
    """ECEF position, velocity and clock bias of a satellite at GPS time ``t``."""
    tk = t - eph.toe
    if abs(tk) >= EPHEMERIS_VALIDITY:
        raise StaleEphemerisError("ephemeris used outside its validity window",
                                  sat_id=eph.sat_id, seconds_from_toe=tk)

    a = eph.sqrt_a ** 2
    n = math.sqrt(GM_EARTH / a ** 3) + eph.delta_n
    E = solve_kepler(eph.m0 + n * tk, eph.e)
    sin_e, cos_e = math.sin(E), math.cos(E)
    one_minus = 1.0 - eph.e * cos_e
    root = math.sqrt(1.0 - eph.e ** 2)

    nu = math.atan2(root * sin_e, cos_e - eph.e)
    phi = nu + eph.omega
    s2, c2 = math.sin(2.0 * phi), math.cos(2.0 * phi)

    u = phi + eph.cus * s2 + eph.cuc * c2
    r = a * one_minus + eph.crs * s2 + eph.crc * c2
    inc = eph.i0 + eph.idot * tk + eph.cis * s2 + eph.cic * c2
    node = eph.omega0 + (eph.omega_dot - OMEGA_EARTH) * tk - OMEGA_EARTH * eph.toe.sow

    xp, yp = r * math.cos(u), r * math.sin(u)
    cn, sn = math.cos(node), math.sin(node)
    ci, si = math.cos(inc), math.sin(inc)
    position = np.array([xp * cn - yp * ci * sn, xp * sn + yp * ci * cn, yp * si])

    # analytic time derivatives
    e_dot = n / one_minus
    phi_dot = e_dot * root / one_minus
    u_dot = phi_dot * (1.0 + 2.0 * (eph.cus * c2 - eph.cuc * s2))
    r_dot = a * eph.e * sin_e * e_dot + 2.0 * phi_dot * (eph.crs * c2 - eph.crc * s2)
    i_dot = eph.idot + 2.0 * phi_dot * (eph.cis * c2 - eph.cic * s2)
    node_dot = eph.omega_dot - OMEGA_EARTH
    xp_dot = r_dot * math.cos(u) - r * u_dot * math.sin(u)
    yp_dot = r_dot * math.sin(u) + r * u_dot * math.cos(u)
    velocity = np.array([
        xp_dot * cn - yp_dot * ci * sn + yp * si * sn * i_dot - position[1] * node_dot,
        xp_dot * sn + yp_dot * ci * cn - yp * si * cn * i_dot + position[0] * node_dot,
        yp_dot * si + yp * ci * i_dot,
    ])

    dt = t - eph.toc
    clock_bias = eph.af0 + eph.af1 * dt + eph.af2 * dt * dt
    clock_drift = eph.af1 + 2.0 * eph.af2 * dt
    if relativity:
        clock_bias += RELATIVISTIC_F * eph.e * eph.sqrt_a * sin_e
        clock_drift += RELATIVISTIC_F * eph.e * eph.sqrt_a * cos_e * e_dot
    return SatelliteState(position, velocity, clock_bias, clock_drift)


def _rotate_about_z(v, angle):
    c, s = math.cos(angle), math.sin(angle)
    return np.array([c * v[0] + s * v[1], -s * v[0] + c * v[1], v[2]])


def signal_emission_state(eph, receive_time, approx_receiver, sagnac=True, relativity=True):
    """
    Satellite state at signal emission for a signal received at ``receive_time``.

    The light-time equation is iterated twice from a nominal travel time; the
    satellite position is then rotated by the Earth's rotation during transit
    (Sagnac) so that ranges can be formed in the ECEF frame at reception.
    """
    receiver = np.asarray(approx_receiver, dtype=float)
    omega = OMEGA_EARTH if sagnac else 0.0
    tau = NOMINAL_TRAVEL_TIME
    for _ in range(2):
        state = sat_state(eph, receive_time - tau, relativity=relativity)
        rotated = _rotate_about_z(state.position, omega * tau)
        tau = float(np.linalg.norm(rotated - receiver)) / SPEED_OF_LIGHT

    state = sat_state(eph, receive_time - tau, relativity=relativity)
    return EmissionState(
        position=_rotate_about_z(state.position, omega * tau),
        velocity=_rotate_about_z(state.velocity, omega * tau),
        clock_bias=state.clock_bias,
        clock_drift=state.clock_drift,
        travel_time=tau,
    )


def inertial_velocity(state):
    """ECEF velocity plus the frame-rotation term: the satellite's speed in space."""
    return state.velocity + np.cross([0.0, 0.0, OMEGA_EARTH], state.position)


# ==============================================================================
# EPHEMERIS SELECTION
# ==============================================================================

class EphemerisStore:
    """Broadcast records grouped by satellite, with nearest-toe selection."""

    def __init__(self, ephemerides=()):
        self._records = defaultdict(list)
        for eph in ephemerides:
            self._records[eph.sat_id].append(eph)
        for records in self._records.values():
            records.sort(key=lambda e: e.toe)

    def __len__(self):
        return sum(len(r) for r in self._records.values())

    def __iter__(self):
        for sat_id in sorted(self._records):
            yield from self._records[sat_id]

    @property
    def satellites(self):
        return sorted(self._records)

    def select(self, sat_id, t):
        return select_ephemeris(self._records.get(sat_id, ()), t, sat_id=sat_id)


def select_ephemeris(records, t, sat_id=None):
    """Record whose toe is nearest ``t``; ties go to the earlier toe."""
    best = None
    for eph in sorted(records, key=lambda e: e.toe):
        if best is None or abs(t - eph.toe) < abs(t - best.toe):
            best = eph
    if best is None:
        raise EphemerisError("no ephemeris for satellite", sat_id=sat_id)
    if abs(t - best.toe) >= EPHEMERIS_VALIDITY:
        raise StaleEphemerisError("nearest ephemeris is stale", sat_id=best.sat_id,
                                  seconds_from_toe=t - best.toe)
    return best


# ==============================================================================
# SYNTHETIC CONSTELLATION
# ==============================================================================

# Target (azimuth, elevation) in degrees at the scenario start, spread around the sky.
DEFAULT_SKY_PLOT = (
    (15.0, 72.0), (60.0, 38.0), (110.0, 21.0), (160.0, 55.0),
    (205.0, 30.0), (250.0, 63.0), (300.0, 24.0), (340.0, 46.0),
)
DEFAULT_PRNS = (2, 5, 7, 12, 15, 19, 24, 29, 3, 10, 17, 21)
NOMINAL_SQRT_A = 5153.7
NOMINAL_INCLINATION = math.radians(55.0)


def synthetic_constellation(origin_geodetic, t0, sky_plot=DEFAULT_SKY_PLOT, rng=None):
    """
    Circular orbits on the nominal GPS shell, each placed so that the satellite
    appears at a chosen azimuth/elevation above ``origin_geodetic`` at ``t0``.
    """
    rng = rng if rng is not None else np.random.default_rng(0)
    lat, lon, h = origin_geodetic
    receiver = geodetic_to_ecef(lat, lon, h)
    to_ecef = enu_rotation(lat, lon).T
    radius = NOMINAL_SQRT_A ** 2

    ephemerides = []
    for index, (az_deg, el_deg) in enumerate(sky_plot):
        az, el = math.radians(az_deg), math.radians(el_deg)
        los = to_ecef @ np.array([math.sin(az) * math.cos(el), math.cos(az) * math.cos(el), math.sin(el)])
        along = float(los @ receiver)
        dist = -along + math.sqrt(along ** 2 - receiver @ receiver + radius ** 2)
        sat = receiver + dist * los

        inc = max(NOMINAL_INCLINATION, math.asin(min(1.0, abs(sat[2]) / radius)) + 0.05)
        arg = math.asin(sat[2] / (radius * math.sin(inc)))
        if index % 2:
            arg = math.pi - arg  # descending pass
        node = math.atan2(sat[1], sat[0]) - math.atan2(math.sin(arg) * math.cos(inc), math.cos(arg))

        prn = DEFAULT_PRNS[index % len(DEFAULT_PRNS)] + 32 * (index // len(DEFAULT_PRNS))
        ephemerides.append(BroadcastEphemeris(
            sat_id=f"G{prn:02d}",
            toe=t0,
            toc=t0,
            sqrt_a=NOMINAL_SQRT_A,
            e=0.0,
            i0=inc,
            omega0=node + OMEGA_EARTH * t0.sow,
            omega=0.0,
            m0=arg,
            af0=float(rng.uniform(-2e-4, 2e-4)),
            af1=float(rng.uniform(-5e-12, 5e-12)),
            iode=float(index + 1),
        ))
    logger.debug(f"Built synthetic constellation with {len(ephemerides)} satellites.")
    return ephemerides
