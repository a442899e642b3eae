# odometry/tests/test_ephemeris.py
import math

import numpy as np
from django.test import SimpleTestCase
from hypothesis import given, settings, strategies as st

from odometry.gnss.constants import SPEED_OF_LIGHT
from odometry.gnss.ephemeris import (
    DEFAULT_SKY_PLOT,
    BroadcastEphemeris,
    EphemerisStore,
    inertial_velocity,
    sat_state,
    select_ephemeris,
    signal_emission_state,
    solve_kepler,
    synthetic_constellation,
)
from odometry.gnss.exceptions import EphemerisError, StaleEphemerisError
from odometry.gnss.frames import EnuFrame, GpsTime, azimuth_elevation

ORIGIN = (math.radians(43.782), math.radians(-79.466), 150.0)
T0 = GpsTime.from_calendar(2024, 6, 1, 15, 0, 0.0)


def _ephemeris(**overrides):
    values = dict(sat_id="G07", toe=T0, toc=T0, sqrt_a=5153.6, e=0.01, i0=0.96, omega0=1.2,
                  omega=0.4, m0=0.3, delta_n=4.5e-9, idot=1e-10, omega_dot=-8e-9,
                  cuc=1e-6, cus=5e-6, crc=250.0, crs=20.0, cic=1e-7, cis=-5e-8,
                  af0=1e-5, af1=1e-12)
    values.update(overrides)
    return BroadcastEphemeris(**values)


class KeplerTests(SimpleTestCase):
    @settings(max_examples=200, deadline=None)
    @given(st.floats(min_value=-math.pi, max_value=math.pi), st.floats(min_value=0.0, max_value=0.05))
    def test_solution_satisfies_keplers_equation(self, mean_anomaly, e):
        E = solve_kepler(mean_anomaly, e)
        self.assertAlmostEqual(E - e * math.sin(E), mean_anomaly, delta=1e-12)


class SatelliteStateTests(SimpleTestCase):
    def test_orbit_radius_and_inertial_speed(self):
        state = sat_state(_ephemeris(), T0 + 600.0)
        self.assertTrue(2.6e7 < np.linalg.norm(state.position) < 2.7e7)
        self.assertTrue(3.7e3 < np.linalg.norm(inertial_velocity(state)) < 4.0e3)

    def test_velocity_matches_finite_differences(self):
        eph = _ephemeris()
        t = T0 + 1234.0
        ahead, behind = sat_state(eph, t + 0.05), sat_state(eph, t - 0.05)
        numeric = (ahead.position - behind.position) / 0.1
        np.testing.assert_allclose(sat_state(eph, t).velocity, numeric, atol=1e-3)

    def test_clock_polynomial(self):
        eph = _ephemeris(e=0.0, af0=1e-5, af1=1e-11, af2=1e-18)
        state = sat_state(eph, T0 + 100.0)
        self.assertAlmostEqual(state.clock_bias, 1e-5 + 1e-9 + 1e-14, delta=1e-20)

    def test_stale_ephemeris_raises(self):
        with self.assertRaises(StaleEphemerisError):
            sat_state(_ephemeris(), T0 + 5 * 3600.0)

    def test_implausible_elements_rejected(self):
        with self.assertRaises(EphemerisError):
            _ephemeris(e=0.2)
        with self.assertRaises(EphemerisError):
            _ephemeris(sqrt_a=4000.0)


class EmissionTests(SimpleTestCase):
    def setUp(self):
        self.frame = EnuFrame.from_geodetic(*ORIGIN)
        self.eph = synthetic_constellation(ORIGIN, T0)[0]

    def test_light_time_is_consistent(self):
        emission = signal_emission_state(self.eph, T0 + 10.0, self.frame.origin_ecef)
        distance = np.linalg.norm(emission.position - self.frame.origin_ecef)
        self.assertAlmostEqual(distance / SPEED_OF_LIGHT, emission.travel_time, delta=1e-9)
        self.assertTrue(0.06 < emission.travel_time < 0.09)

    def test_sagnac_rotation_moves_the_satellite_by_tens_of_metres(self):
        with_sagnac = signal_emission_state(self.eph, T0, self.frame.origin_ecef)
        without = signal_emission_state(self.eph, T0, self.frame.origin_ecef, sagnac=False)
        shift = np.linalg.norm(with_sagnac.position - without.position)
        self.assertTrue(10.0 < shift < 200.0)


class SelectionTests(SimpleTestCase):
    def test_nearest_toe_wins_and_ties_go_early(self):
        early, late = _ephemeris(toe=T0, iode=1.0), _ephemeris(toe=T0 + 7200.0, iode=2.0)
        self.assertEqual(select_ephemeris([late, early], T0 + 1000.0).iode, 1.0)
        self.assertEqual(select_ephemeris([late, early], T0 + 6000.0).iode, 2.0)
        self.assertEqual(select_ephemeris([late, early], T0 + 3600.0).iode, 1.0)

    def test_missing_satellite(self):
        with self.assertRaises(EphemerisError):
            EphemerisStore([_ephemeris()]).select("G99", T0)

    def test_store_groups_by_satellite(self):
        store = EphemerisStore([_ephemeris(sat_id="G07"), _ephemeris(sat_id="G02")])
        self.assertEqual(store.satellites, ["G02", "G07"])
        self.assertEqual(len(store), 2)


class SyntheticConstellationTests(SimpleTestCase):
    def test_satellites_appear_where_requested(self):
        frame = EnuFrame.from_geodetic(*ORIGIN)
        ephemerides = synthetic_constellation(ORIGIN, T0)
        self.assertEqual(len(ephemerides), len(DEFAULT_SKY_PLOT))
        for eph, (az_deg, el_deg) in zip(ephemerides, DEFAULT_SKY_PLOT):
            position = sat_state(eph, T0, relativity=False).position
            az, el = azimuth_elevation(frame.to_enu(position))
            self.assertAlmostEqual(math.degrees(el), el_deg, delta=1e-6)
            self.assertAlmostEqual(math.degrees(az), az_deg, delta=1e-6)

    def test_ids_are_unique(self):
        ids = [e.sat_id for e in synthetic_constellation(ORIGIN, T0)]
        self.assertEqual(len(ids), len(set(ids)))
