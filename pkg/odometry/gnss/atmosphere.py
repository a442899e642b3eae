# odometry/gnss/atmosphere.py
"""
Ionospheric and tropospheric delay models.

The estimator uses these to correct double-differenced phase; the simulator
uses them (scaled) to generate truth. Tables are embedded constants:

- Klobuchar: the broadcast single-frequency algorithm (GPS ICD-200, 20.3.3.5.2.5).
- UNB3: surface meteorology from the University of New Brunswick tables
  (Leandro et al., ION NTM 2006) at 15/30/45/60/75 degrees latitude.
- Niell: hydrostatic/wet mapping coefficients (Niell, JGR 1996).
"""
import math
from dataclasses import dataclass

import numpy as np

from .constants import SPEED_OF_LIGHT
from .exceptions import AtmosphereError

MIN_TROPO_ELEVATION = 0.05  # rad


# ==============================================================================
# IONOSPHERE
# ==============================================================================

@dataclass(frozen=True)
class KlobucharParams:
    """Broadcast coefficients: alpha in s, s/sc, s/sc^2, s/sc^3; beta likewise in s."""

    alpha: tuple = (0.0, 0.0, 0.0, 0.0)
    beta: tuple = (0.0, 0.0, 0.0, 0.0)

    def __post_init__(self):
        if len(self.alpha) != 4 or len(self.beta) != 4:
            raise AtmosphereError("Klobuchar needs four alpha and four beta coefficients")
        values = [*self.alpha, *self.beta]
        if not all(math.isfinite(v) for v in values):
            raise AtmosphereError("non-finite Klobuchar coefficient")
        if abs(self.alpha[0]) >= 1e-7:
            raise AtmosphereError("implausible Klobuchar alpha0", alpha0=self.alpha[0])
        object.__setattr__(self, "alpha", tuple(float(v) for v in self.alpha))
        object.__setattr__(self, "beta", tuple(float(v) for v in self.beta))


# Representative mid-solar-activity broadcast set.
DEFAULT_KLOBUCHAR = KlobucharParams(
    alpha=(1.1176e-08, 7.4506e-09, -5.9605e-08, -5.9605e-08),
    beta=(9.0112e+04, 1.6384e+04, -1.9661e+05, -6.5536e+04),
)


def klobuchar_delay(params, user, az, el, t):
    """
    L1 slant ionospheric delay in metres.

    ``user`` is geodetic ``(lat, lon, h)`` in radians; ``az``/``el`` in radians;
    ``t`` a GpsTime. Angles inside the algorithm are in semicircles.
    """
    lat, lon = user[0], user[1]
    psi = 0.0137 / (el / math.pi + 0.11) - 0.022
    phi = lat / math.pi + psi * math.cos(az)
    phi = max(-0.416, min(0.416, phi))
    lam = lon / math.pi + psi * math.sin(az) / math.cos(phi * math.pi)
    phi += 0.064 * math.cos((lam - 1.617) * math.pi)

    local_time = 43200.0 * lam + t.sow
    local_time -= math.floor(local_time / 86400.0) * 86400.0
    slant = 1.0 + 16.0 * (0.53 - el / math.pi) ** 3

    powers = np.array([1.0, phi, phi ** 2, phi ** 3])
    amplitude = max(float(powers @ np.array(params.alpha)), 0.0)
    period = max(float(powers @ np.array(params.beta)), 72000.0)
    x = 2.0 * math.pi * (local_time - 50400.0) / period
    if abs(x) < 1.57:
        vertical = 5e-9 + amplitude * (1.0 + x * x * (-0.5 + x * x / 24.0))
    else:
        vertical = 5e-9
    return SPEED_OF_LIGHT * slant * vertical


# ==============================================================================
# TROPOSPHERE
# ==============================================================================

@dataclass(frozen=True)
class TropoState:
    latitude: float      # rad
    day_of_year: int
    height: float = 0.0  # m

    def __post_init__(self):
        if not 1 <= int(self.day_of_year) <= 366:
            raise AtmosphereError("day of year outside [1, 366]", day_of_year=self.day_of_year)


# UNB3 rows: 15, 30, 45, 60, 75 degrees
_UNB3_AVERAGE = np.array([
    # P [mbar], T [K], e [mbar], beta [K/m], lambda
    [1013.25, 299.65, 26.31, 0.00630, 2.77],
    [1017.25, 294.15, 21.79, 0.00605, 3.15],
    [1015.75, 283.15, 11.66, 0.00558, 2.57],
    [1011.75, 272.15, 6.78, 0.00539, 1.81],
    [1013.00, 263.65, 4.11, 0.00453, 1.55],
])
_UNB3_AMPLITUDE = np.array([
    [0.00, 0.00, 0.00, 0.00000, 0.00],
    [-3.75, 7.00, 8.85, 0.00025, 0.33],
    [-2.25, 11.00, 7.24, 0.00032, 0.46],
    [-1.75, 15.00, 5.36, 0.00081, 0.74],
    [-0.50, 14.50, 3.39, 0.00062, 0.30],
])

# Refractivity and gas constants
K1 = 77.604          # K/mbar
K2_PRIME = 16.6      # K/mbar
K3 = 377600.0        # K^2/mbar
R_DRY = 287.054      # J/(kg K)
G_MEAN = 9.784       # m/s^2, at the atmospheric centroid
G_SURFACE = 9.80665  # m/s^2


def _latitude_weights(lat_deg):
    """Linear interpolation weights over the 15-degree table rows; clamped outside 15..75."""
    a = abs(lat_deg)
    weights = np.zeros(5)
    if a <= 15.0:
        weights[0] = 1.0
    elif a >= 75.0:
        weights[4] = 1.0
    else:
        i = int((a - 15.0) // 15.0)
        d = (a - 15.0 - 15.0 * i) / 15.0
        weights[i], weights[i + 1] = 1.0 - d, d
    return weights


def unb3_weather(latitude, day_of_year):
    """Sea-level (P, T, e, beta, lambda) for a latitude in radians."""
    lat_deg = math.degrees(latitude)
    phase = day_of_year - (28.0 if lat_deg >= 0.0 else 211.0)
    seasonal = -math.cos(2.0 * math.pi * phase / 365.25)
    w = _latitude_weights(lat_deg)
    return tuple(w @ _UNB3_AVERAGE + (w @ _UNB3_AMPLITUDE) * seasonal)


def zenith_delays(state):
    """UNB3 zenith hydrostatic and wet delays (m) at the state's height."""
    pressure, temp, vapour, beta, lam = unb3_weather(state.latitude, state.day_of_year)
    height = state.height
    ratio = 1.0 - beta * height / temp
    if ratio <= 0.0:
        raise AtmosphereError("height outside the UNB3 lapse-rate model", height=height)
    exponent = G_SURFACE / (R_DRY * beta)

    zhd = 1e-6 * K1 * R_DRY * pressure / G_MEAN * ratio ** exponent
    tm = temp * (1.0 - beta * R_DRY / (G_MEAN * (lam + 1.0)))
    zwd = (1e-6 * (tm * K2_PRIME + K3) * R_DRY / (G_MEAN * (lam + 1.0) - beta * R_DRY)
           * vapour / temp * ratio ** ((lam + 1.0) * exponent - 1.0))
    return zhd, zwd


# Niell coefficients at 15/30/45/60/75 degrees: hydrostatic average a,b,c;
# hydrostatic amplitude a,b,c; wet a,b,c.
_NIELL = np.array([
    [1.2769934E-3, 1.2683230E-3, 1.2465397E-3, 1.2196049E-3, 1.2045996E-3],
    [2.9153695E-3, 2.9152299E-3, 2.9288445E-3, 2.9022565E-3, 2.9024912E-3],
    [62.610505E-3, 62.837393E-3, 63.721774E-3, 63.824265E-3, 64.258455E-3],
    [0.0000000E-0, 1.2709626E-5, 2.6523662E-5, 3.4000452E-5, 4.1202191E-5],
    [0.0000000E-0, 2.1414979E-5, 3.0160779E-5, 7.2562722E-5, 11.723375E-5],
    [0.0000000E-0, 9.0128400E-5, 4.3497037E-5, 84.795348E-5, 170.37206E-5],
    [5.8021897E-4, 5.6794847E-4, 5.8118019E-4, 5.9727542E-4, 6.1641693E-4],
    [1.4275268E-3, 1.5138625E-3, 1.4572752E-3, 1.5007428E-3, 1.7599082E-3],
    [4.3472961E-2, 4.6729510E-2, 4.3908931E-2, 4.4626982E-2, 5.4736038E-2],
])
_NIELL_HEIGHT = (2.53E-5, 5.49E-3, 1.14E-3)


def _continued_fraction(el, a, b, c):
    s = math.sin(el)
    return (1.0 + a / (1.0 + b / (1.0 + c))) / (s + a / (s + b / (s + c)))


def niell_mapping(state, el):
    """Hydrostatic and wet Niell mapping factors."""
    lat_deg = math.degrees(state.latitude)
    coef = _NIELL @ _latitude_weights(lat_deg)
    year = (state.day_of_year - 28.0) / 365.25 + (0.5 if lat_deg < 0.0 else 0.0)
    hydro = coef[0:3] - coef[3:6] * math.cos(2.0 * math.pi * year)
    wet = coef[6:9]

    height_term = (1.0 / math.sin(el) - _continued_fraction(el, *_NIELL_HEIGHT)) * state.height * 1e-3
    return _continued_fraction(el, *hydro) + height_term, _continued_fraction(el, *wet)


def tropo_components(state, el):
    if el <= MIN_TROPO_ELEVATION:
        raise AtmosphereError("elevation too low for the troposphere model", elevation=el)
    zhd, zwd = zenith_delays(state)
    mh, mw = niell_mapping(state, el)
    return zhd * mh, zwd * mw


def tropo_delay(state, el):
    """Slant tropospheric delay (m): UNB3 zenith delays mapped by Niell."""
    hydro, wet = tropo_components(state, el)
    return hydro + wet


# ==============================================================================
# DIFFERENCED CORRECTIONS
# ==============================================================================

@dataclass(frozen=True)
class SlantDelay:
    tropo: float = 0.0
    iono: float = 0.0

    @property
    def phase_effect(self):
        """Net effect on carrier-phase range: troposphere delays, ionosphere advances."""
        return self.tropo - self.iono


@dataclass(frozen=True)
class AtmosphereModel:
    """Which corrections to evaluate, and how strongly (scales are used by the simulator)."""

    klobuchar: KlobucharParams = None
    use_iono: bool = False
    use_tropo: bool = True
    iono_scale: float = 1.0
    tropo_scale: float = 1.0

    def slant(self, user, az, el, t):
        tropo = iono = 0.0
        if self.use_tropo and el > MIN_TROPO_ELEVATION:
            state = TropoState(user[0], t.day_of_year(), user[2])
            tropo = self.tropo_scale * tropo_delay(state, el)
        if self.use_iono and self.klobuchar is not None:
            iono = self.iono_scale * klobuchar_delay(self.klobuchar, user, az, el, t)
        return SlantDelay(tropo, iono)


def differenced_atmo_correction(ref_a, ref_b, other_a, other_b, use_iono=True):
    """
    Double difference (epoch b minus a, other satellite minus reference) of
    modelled delays, to be subtracted from the double-differenced phase.
    """
    def _dd(attr):
        return ((getattr(other_b, attr) - getattr(other_a, attr))
                - (getattr(ref_b, attr) - getattr(ref_a, attr)))

    correction = _dd("tropo")
    if use_iono:
        correction -= _dd("iono")
    return correction
