# odometry/tests/test_atmosphere.py
import math

from django.test import SimpleTestCase
from hypothesis import given, strategies as st

from odometry.gnss.atmosphere import (
    DEFAULT_KLOBUCHAR,
    AtmosphereModel,
    KlobucharParams,
    SlantDelay,
    TropoState,
    differenced_atmo_correction,
    klobuchar_delay,
    niell_mapping,
    tropo_delay,
    zenith_delays,
)
from odometry.gnss.constants import SPEED_OF_LIGHT
from odometry.gnss.exceptions import AtmosphereError
from odometry.gnss.frames import GpsTime

USER = (math.radians(43.782), math.radians(-79.466), 150.0)
# Local time at the user is roughly sow - 19070 s.
NIGHT = GpsTime.from_week_sow(2300, 26270.0)
AFTERNOON = GpsTime.from_week_sow(2300, 69470.0)


class TroposphereTests(SimpleTestCase):
    def setUp(self):
        self.state = TropoState(math.radians(45.0), 180)

    def test_zenith_delays_have_textbook_size(self):
        zhd, zwd = zenith_delays(self.state)
        self.assertTrue(2.2 < zhd < 2.4)
        self.assertTrue(0.02 < zwd < 0.4)

    def test_hydrostatic_delay_shrinks_with_height(self):
        high = TropoState(math.radians(45.0), 180, height=1500.0)
        self.assertLess(zenith_delays(high)[0], zenith_delays(self.state)[0])

    def test_mapping_is_one_at_zenith(self):
        hydro, wet = niell_mapping(self.state, math.pi / 2)
        self.assertAlmostEqual(hydro, 1.0, places=12)
        self.assertAlmostEqual(wet, 1.0, places=12)

    def test_mapping_grows_towards_the_horizon(self):
        delays = [tropo_delay(self.state, math.radians(el)) for el in (60.0, 30.0, 10.0)]
        self.assertLess(delays[0], delays[1])
        self.assertLess(delays[1], delays[2])
        self.assertTrue(10.0 < delays[2] < 16.0)

    @given(st.floats(min_value=0.06, max_value=math.pi / 2))
    def test_mapping_never_below_one(self, el):
        hydro, wet = niell_mapping(self.state, el)
        self.assertGreaterEqual(hydro, 1.0 - 1e-9)
        self.assertGreaterEqual(wet, 1.0 - 1e-9)

    def test_low_elevation_raises(self):
        with self.assertRaises(AtmosphereError):
            tropo_delay(self.state, 0.04)

    def test_day_of_year_validated(self):
        with self.assertRaises(AtmosphereError):
            TropoState(0.5, 0)
        with self.assertRaises(AtmosphereError):
            TropoState(0.5, 367)


class KlobucharTests(SimpleTestCase):
    @staticmethod
    def _night_floor(el):
        return SPEED_OF_LIGHT * 5e-9 * (1.0 + 16.0 * (0.53 - el / math.pi) ** 3)

    def test_night_delay_is_the_constant_floor(self):
        for el in (math.pi / 2, math.radians(10.0)):
            delay = klobuchar_delay(DEFAULT_KLOBUCHAR, USER, math.pi / 2, el, NIGHT)
            self.assertAlmostEqual(delay, self._night_floor(el), places=9)

    def test_afternoon_delay_exceeds_night(self):
        day = klobuchar_delay(DEFAULT_KLOBUCHAR, USER, 0.0, math.pi / 2, AFTERNOON)
        night = klobuchar_delay(DEFAULT_KLOBUCHAR, USER, 0.0, math.pi / 2, NIGHT)
        self.assertGreater(day, night)
        self.assertLess(day, 30.0)

    def test_coefficients_validated(self):
        with self.assertRaises(AtmosphereError):
            KlobucharParams(alpha=(1e-6, 0.0, 0.0, 0.0))
        with self.assertRaises(AtmosphereError):
            KlobucharParams(alpha=(0.0, 0.0, 0.0))
        with self.assertRaises(AtmosphereError):
            KlobucharParams(beta=(math.nan, 0.0, 0.0, 0.0))


class AtmosphereModelTests(SimpleTestCase):
    def test_disabled_model_is_silent(self):
        model = AtmosphereModel(use_tropo=False, use_iono=False)
        self.assertEqual(model.slant(USER, 0.0, 0.8, NIGHT), SlantDelay(0.0, 0.0))

    def test_iono_needs_coefficients(self):
        model = AtmosphereModel(klobuchar=None, use_iono=True, use_tropo=False)
        self.assertEqual(model.slant(USER, 0.0, 0.8, NIGHT).iono, 0.0)

    def test_scales_apply(self):
        full = AtmosphereModel(DEFAULT_KLOBUCHAR, use_iono=True).slant(USER, 1.0, 0.6, AFTERNOON)
        half = AtmosphereModel(DEFAULT_KLOBUCHAR, use_iono=True, iono_scale=0.5,
                               tropo_scale=0.5).slant(USER, 1.0, 0.6, AFTERNOON)
        self.assertAlmostEqual(half.tropo, 0.5 * full.tropo, places=12)
        self.assertAlmostEqual(half.iono, 0.5 * full.iono, places=12)

    def test_tropo_skipped_below_the_model_floor(self):
        slant = AtmosphereModel().slant(USER, 0.0, 0.03, NIGHT)
        self.assertEqual(slant.tropo, 0.0)

    def test_phase_effect_sign(self):
        self.assertAlmostEqual(SlantDelay(tropo=2.5, iono=1.0).phase_effect, 1.5)


class DifferencedCorrectionTests(SimpleTestCase):
    def test_identical_slants_cancel(self):
        s = SlantDelay(2.4, 3.1)
        self.assertEqual(differenced_atmo_correction(s, s, s, s), 0.0)

    def test_double_difference(self):
        ref_a, ref_b = SlantDelay(2.0, 1.0), SlantDelay(2.1, 1.05)
        other_a, other_b = SlantDelay(5.0, 3.0), SlantDelay(5.5, 3.2)
        self.assertAlmostEqual(differenced_atmo_correction(ref_a, ref_b, other_a, other_b), 0.25)
        self.assertAlmostEqual(
            differenced_atmo_correction(ref_a, ref_b, other_a, other_b, use_iono=False), 0.4)
