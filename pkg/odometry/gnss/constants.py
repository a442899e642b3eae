# odometry/gnss/constants.py
"""
Physical and system constants shared by every engine module.

Values are the standard WGS-84 / GPS interface-control-document figures.
Keep them in this one table so that the simulator and the estimator can never
disagree about, say, the speed of light.
"""
import math

# --- WGS-84 ellipsoid ---
WGS84_A = 6378137.0                      # semi-major axis [m]
WGS84_F = 1.0 / 298.257223563            # flattening
WGS84_B = WGS84_A * (1.0 - WGS84_F)      # semi-minor axis [m]
WGS84_E2 = WGS84_F * (2.0 - WGS84_F)     # first eccentricity squared

# --- GPS ICD constants ---
GM_EARTH = 3.986005e14                   # gravitational parameter [m^3/s^2]
OMEGA_EARTH = 7.2921151467e-5            # Earth rotation rate [rad/s]
SPEED_OF_LIGHT = 299792458.0             # [m/s]
RELATIVISTIC_F = -2.0 * math.sqrt(GM_EARTH) / SPEED_OF_LIGHT ** 2  # [s/m^0.5]

# --- L1 carrier ---
L1_FREQUENCY = 1575.42e6                 # [Hz]
L1_WAVELENGTH = SPEED_OF_LIGHT / L1_FREQUENCY  # ~0.1903 m

# --- Time ---
SECONDS_IN_WEEK = 604800
NANOS_IN_SECOND = 1_000_000_000
NANOS_IN_WEEK = SECONDS_IN_WEEK * NANOS_IN_SECOND
GPS_UTC_LEAP_SECONDS = 18                # fixed offset, no leap-second table

# Ephemeris validity around toe [s]
EPHEMERIS_VALIDITY = 4 * 3600.0
