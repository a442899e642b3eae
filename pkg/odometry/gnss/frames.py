# odometry/gnss/frames.py
"""
Coordinate frames, GPS time and WGS-84 geodesy.

Frames used throughout the engine:

    g  global east-north-up frame, tangent to the Earth at the start of a run
    v  vehicle frame, centre of the vehicle at axle height (x forward, z up)
    r  GPS receiver (antenna) frame, rigidly offset from v by the lever arm
    s  satellite antenna phase centre, used when computing ranges
    c  camera frame; carried in the extrinsics for completeness, never processed
"""
import math
from dataclasses import dataclass, field
from datetime import datetime, timedelta

import numpy as np

from .constants import (
    NANOS_IN_SECOND,
    NANOS_IN_WEEK,
    SECONDS_IN_WEEK,
    WGS84_A,
    WGS84_E2,
)
from .exceptions import ConfigurationError, GeodesyError

GPS_EPOCH = datetime(1980, 1, 6)


# ==============================================================================
# GPS TIME
# ==============================================================================

@dataclass(frozen=True, order=True)
class GpsTime:
    """
    A GPS timestamp stored as an integer week plus integer nanoseconds of week.

    Integer storage keeps differences exact over long runs; arithmetic with
    float seconds rounds to the nearest nanosecond.
    """

    week: int
    nanos: int

    def __post_init__(self):
        if not 0 <= self.nanos < NANOS_IN_WEEK:
            raise ValueError(f"nanoseconds of week out of range: {self.nanos}")

    @classmethod
    def from_week_sow(cls, week, sow):
        return cls._normalized(int(week), int(round(float(sow) * NANOS_IN_SECOND)))

    @classmethod
    def from_calendar(cls, year, month, day, hour=0, minute=0, second=0.0):
        whole = int(math.floor(second))
        frac_ns = int(round((second - whole) * NANOS_IN_SECOND))
        delta = datetime(year, month, day, hour, minute) - GPS_EPOCH
        total_ns = (delta.days * 86400 + delta.seconds + whole) * NANOS_IN_SECOND + frac_ns
        return cls._normalized(0, total_ns)

    @classmethod
    def _normalized(cls, week, nanos):
        extra, nanos = divmod(nanos, NANOS_IN_WEEK)
        return cls(week + extra, nanos)

    @property
    def sow(self):
        return self.nanos / NANOS_IN_SECOND

    @property
    def total_seconds(self):
        return self.week * SECONDS_IN_WEEK + self.sow

    def to_calendar(self):
        """Return ``(year, month, day, hour, minute, second)`` with fractional seconds."""
        whole, frac = divmod(self.nanos, NANOS_IN_SECOND)
        stamp = GPS_EPOCH + timedelta(weeks=self.week, seconds=whole)
        return (stamp.year, stamp.month, stamp.day, stamp.hour, stamp.minute,
                stamp.second + frac / NANOS_IN_SECOND)

    def day_of_year(self):
        year, month, day, *_ = self.to_calendar()
        return datetime(year, month, day).timetuple().tm_yday

    def __add__(self, seconds):
        if isinstance(seconds, GpsTime):
            return NotImplemented
        return GpsTime._normalized(self.week, self.nanos + int(round(seconds * NANOS_IN_SECOND)))

    def __sub__(self, other):
        if isinstance(other, GpsTime):
            diff = (self.week - other.week) * NANOS_IN_WEEK + (self.nanos - other.nanos)
            return diff / NANOS_IN_SECOND
        return self + (-other)

    def __str__(self):
        return f"{self.week}:{self.sow:.9f}"


# ==============================================================================
# WGS-84 GEODESY
# ==============================================================================

def geodetic_to_ecef(lat, lon, h):
    """Closed-form WGS-84 conversion; angles in radians, height in metres."""
    sin_lat = math.sin(lat)
    n = WGS84_A / math.sqrt(1.0 - WGS84_E2 * sin_lat * sin_lat)
    return np.array([
        (n + h) * math.cos(lat) * math.cos(lon),
        (n + h) * math.cos(lat) * math.sin(lon),
        (n * (1.0 - WGS84_E2) + h) * sin_lat,
    ])


def ecef_to_geodetic(p, tol=1e-13, max_iter=20):
    """
    Iterative inverse of ``geodetic_to_ecef``.

    Returns ``(lat, lon, h)``. Raises ``GeodesyError`` when the input is too
    close to the Earth's centre or the latitude does not settle.
    """
    x, y, z = (float(c) for c in p)
    if not all(math.isfinite(c) for c in (x, y, z)):
        raise GeodesyError("non-finite ECEF coordinates", point=[x, y, z])
    if math.sqrt(x * x + y * y + z * z) <= 1e6:
        raise GeodesyError("point too close to the Earth's centre", point=[x, y, z])

    lon = math.atan2(y, x)
    rho = math.hypot(x, y)
    lat = math.atan2(z, rho * (1.0 - WGS84_E2))
    for _ in range(max_iter):
        sin_lat = math.sin(lat)
        n = WGS84_A / math.sqrt(1.0 - WGS84_E2 * sin_lat * sin_lat)
        new_lat = math.atan2(z + WGS84_E2 * n * sin_lat, rho)
        if abs(new_lat - lat) < tol:
            lat = new_lat
            break
        lat = new_lat
    else:
        raise GeodesyError("geodetic latitude did not converge", point=[x, y, z])

    sin_lat, cos_lat = math.sin(lat), math.cos(lat)
    h = rho * cos_lat + z * sin_lat - WGS84_A * math.sqrt(1.0 - WGS84_E2 * sin_lat * sin_lat)
    return lat, lon, h


def enu_rotation(lat, lon):
    """Rotation taking ECEF vectors into the local east-north-up frame."""
    sl, cl = math.sin(lat), math.cos(lat)
    so, co = math.sin(lon), math.cos(lon)
    return np.array([
        [-so, co, 0.0],
        [-sl * co, -sl * so, cl],
        [cl * co, cl * so, sl],
    ])


@dataclass(frozen=True, eq=False)
class EnuFrame:
    """Local tangent frame anchored at a geodetic origin."""

    lat: float
    lon: float
    height: float
    origin_ecef: np.ndarray
    rotation_ecef_to_enu: np.ndarray

    @classmethod
    def from_geodetic(cls, lat, lon, h):
        return cls(lat, lon, h, geodetic_to_ecef(lat, lon, h), enu_rotation(lat, lon))

    @classmethod
    def from_ecef(cls, p):
        lat, lon, h = ecef_to_geodetic(p)
        return cls(lat, lon, h, np.asarray(p, dtype=float).copy(), enu_rotation(lat, lon))

    @property
    def origin_geodetic(self):
        return self.lat, self.lon, self.height

    def to_enu(self, p):
        """ECEF point(s) of shape (3,) or (N, 3) into ENU."""
        return (np.asarray(p, dtype=float) - self.origin_ecef) @ self.rotation_ecef_to_enu.T

    def to_ecef(self, enu):
        return np.asarray(enu, dtype=float) @ self.rotation_ecef_to_enu + self.origin_ecef

    def vector_to_enu(self, v):
        """Rotate a free vector (e.g. a velocity) without translating it."""
        return np.asarray(v, dtype=float) @ self.rotation_ecef_to_enu.T

    def vector_to_ecef(self, v):
        return np.asarray(v, dtype=float) @ self.rotation_ecef_to_enu


def ecef_to_enu(frame, p):
    return frame.to_enu(p)


def azimuth_elevation(los_enu):
    """Azimuth (from north, clockwise) and elevation of an ENU line-of-sight vector."""
    e, n, u = los_enu
    horizontal = math.hypot(e, n)
    return math.atan2(e, n) % (2.0 * math.pi), math.atan2(u, horizontal)


# ==============================================================================
# EXTRINSICS
# ==============================================================================

@dataclass(frozen=True, eq=False)
class Extrinsics:
    """
    Rigid sensor placement on the vehicle.

    ``r_rv_v`` is the receiver antenna lever arm in the vehicle frame. ``T_vc``
    (camera in vehicle) is carried as a 4x4 matrix for documentation only.
    """

    r_rv_v: np.ndarray = field(default_factory=lambda: np.array([0.5, 0.0, 1.0]))
    T_vc: np.ndarray = field(default_factory=lambda: np.eye(4))

    def __post_init__(self):
        lever = np.asarray(self.r_rv_v, dtype=float)
        if lever.shape != (3,) or not np.all(np.isfinite(lever)):
            raise ConfigurationError("lever arm must be a finite 3-vector")
        if np.linalg.norm(lever) >= 5.0:
            raise ConfigurationError("lever arm longer than 5 m", lever_arm=lever.tolist())
        object.__setattr__(self, "r_rv_v", lever)
