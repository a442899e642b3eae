# odometry/tests/test_rinex.py
import math
import tempfile
from pathlib import Path

from django.test import SimpleTestCase
from hypothesis import HealthCheck, given, settings, strategies as st

from odometry.gnss.atmosphere import DEFAULT_KLOBUCHAR
from odometry.gnss.ephemeris import synthetic_constellation
from odometry.gnss.exceptions import (
    EmptyObservationError,
    OdometryError,
    RinexFormatError,
    RinexHeaderError,
)
from odometry.gnss.frames import GpsTime
from odometry.gnss.observations import ObservationEpoch, SatelliteObservation
from odometry.gnss.rinex import parse_rinex_nav, parse_rinex_obs, write_rinex_nav, write_rinex_obs

FIXTURES = Path(__file__).resolve().parent / "fixtures"
T0 = GpsTime.from_calendar(2024, 6, 1, 15, 0, 0.0)

V2_HEADER = "\n".join([
    f"{'     2.11           OBSERVATION DATA    G (GPS)':<60}RINEX VERSION / TYPE",
    f"{'     3    C1    L1    D1':<60}# / TYPES OF OBSERV",
    f"{'':<60}END OF HEADER",
]) + "\n"


class ObservationParsingTests(SimpleTestCase):
    def test_rinex2_fixture(self):
        with self.assertLogs('odometry', level='WARNING'):
            epochs = parse_rinex_obs(FIXTURES / "obs_v211.rnx")
        self.assertEqual([e.t - T0 for e in epochs], [0.0, 1.0, 3.0])
        self.assertEqual(epochs[0].sat_ids, ["G05", "G07"])

        g05 = epochs[0].get("G05")
        self.assertAlmostEqual(g05.pseudorange, 21000000.123, places=6)
        self.assertAlmostEqual(g05.phase, 110354000.456, places=6)
        self.assertAlmostEqual(g05.doppler, -1234.567, places=6)
        self.assertAlmostEqual(g05.snr, 45.0)
        self.assertFalse(g05.lock_lost)

        self.assertTrue(epochs[0].get("G07").lock_lost)
        lost = epochs[1].get("G07")
        self.assertTrue(lost.lock_lost)
        self.assertFalse(lost.has_phase)
        self.assertEqual(epochs[2].sat_ids, ["G05"])

    def test_rinex3_fixture(self):
        epochs = parse_rinex_obs(FIXTURES / "obs_v304.rnx")
        self.assertEqual(len(epochs), 2)
        self.assertEqual(epochs[0].sat_ids, ["G05", "G07"])
        self.assertAlmostEqual(epochs[0].get("G07").doppler, 500.25, places=6)
        self.assertFalse(epochs[0].get("G07").lock_lost)
        self.assertEqual(epochs[1].t - epochs[0].t, 1.0)

    def test_wrong_file_type(self):
        with self.assertRaises(RinexHeaderError):
            parse_rinex_obs(FIXTURES / "nav_v304.rnx")

    def test_missing_version_line(self):
        with tempfile.TemporaryDirectory() as tmp:
            path = Path(tmp) / "bad.rnx"
            path.write_text("hello\n")
            with self.assertRaises(RinexHeaderError):
                parse_rinex_obs(path)

    def test_header_only_file_has_zero_epochs(self):
        with tempfile.TemporaryDirectory() as tmp:
            path = Path(tmp) / "empty.rnx"
            path.write_text(V2_HEADER)
            with self.assertRaises(EmptyObservationError) as ctx:
                parse_rinex_obs(path)
            self.assertEqual(ctx.exception.code, "zero_epochs")

    def test_unreadable_path(self):
        with self.assertRaises(OdometryError):
            parse_rinex_obs(FIXTURES / "does_not_exist.rnx")

    @settings(max_examples=60, deadline=None, suppress_health_check=[HealthCheck.too_slow])
    @given(st.lists(st.one_of(
        st.text(alphabet=st.characters(min_codepoint=32, max_codepoint=126), max_size=90),
        st.sampled_from([
            " 24  6  1 15  0  0.0000000  0  2G05G07",
            " 24 13  1 15  0  0.0000000  0  1G05",
            " 24  6  1 15  0  1.0000000  4  9",
            "  21000000.123   110354000.456       -1234.567",
            "  abcdefghijklm 7 110354000.456 7",
        ])), max_size=25))
    def test_random_bodies_never_escape_the_error_hierarchy(self, lines):
        with tempfile.TemporaryDirectory() as tmp:
            path = Path(tmp) / "fuzz.rnx"
            path.write_text(V2_HEADER + "\n".join(lines) + "\n")
            try:
                epochs = parse_rinex_obs(path)
            except OdometryError:
                return
            for epoch in epochs:
                self.assertIsInstance(epoch, ObservationEpoch)


class ObservationWritingTests(SimpleTestCase):
    def _epochs(self):
        first = ObservationEpoch(T0, (
            SatelliteObservation("G02", 120000000.125, 22800000.5, -812.25, 44.0),
            SatelliteObservation("G05", 110000000.75, 20900000.25, 310.5, 38.0, lock_lost=True),
        ))
        second = ObservationEpoch(T0 + 1.0, (
            SatelliteObservation("G02", 120000812.375, 22800154.5, -812.0, 44.0),
            SatelliteObservation("G05", math.nan, 20899941.0, 310.0, 38.0, lock_lost=True),
        ))
        return [first, second]

    def test_written_file_parses_back(self):
        with tempfile.TemporaryDirectory() as tmp:
            path = Path(tmp) / "sim.obs"
            write_rinex_obs(self._epochs(), path)
            parsed = parse_rinex_obs(path)
        self.assertEqual([e.t for e in parsed], [T0, T0 + 1.0])
        for original, back in zip(self._epochs(), parsed):
            self.assertEqual(original.sat_ids, back.sat_ids)
            for a, b in zip(original, back):
                self.assertEqual(a.lock_lost, b.lock_lost)
                self.assertAlmostEqual(a.pseudorange, b.pseudorange, places=3)
                self.assertAlmostEqual(a.doppler, b.doppler, places=3)
                if a.has_phase:
                    self.assertAlmostEqual(a.phase, b.phase, places=3)
                else:
                    self.assertFalse(b.has_phase)

    def test_output_is_deterministic(self):
        with tempfile.TemporaryDirectory() as tmp:
            a, b = Path(tmp) / "a.obs", Path(tmp) / "b.obs"
            write_rinex_obs(self._epochs(), a)
            write_rinex_obs(self._epochs(), b)
            self.assertEqual(a.read_bytes(), b.read_bytes())

    def test_refuses_empty_and_oversized(self):
        with tempfile.TemporaryDirectory() as tmp:
            with self.assertRaises(EmptyObservationError):
                write_rinex_obs([], Path(tmp) / "x.obs")
            huge = ObservationEpoch(T0, (SatelliteObservation("G02", 2e10),))
            with self.assertRaises(RinexFormatError):
                write_rinex_obs([huge], Path(tmp) / "y.obs")


class NavigationTests(SimpleTestCase):
    def test_rinex3_fixture(self):
        with self.assertLogs('odometry', level='WARNING'):
            ephemerides, klobuchar = parse_rinex_nav(FIXTURES / "nav_v304.rnx")
        self.assertEqual([e.sat_id for e in ephemerides], ["G07"])
        eph = ephemerides[0]
        self.assertEqual(eph.toe, GpsTime(2316, 576000 * 10 ** 9))
        self.assertEqual(eph.toc, eph.toe)
        self.assertAlmostEqual(eph.sqrt_a, 5153.6)
        self.assertAlmostEqual(eph.e, 0.01)
        self.assertAlmostEqual(eph.omega_dot, -8e-9)
        self.assertAlmostEqual(eph.tgd, -1.1e-8)
        self.assertEqual(eph.iode, 21.0)
        self.assertEqual(klobuchar.alpha, DEFAULT_KLOBUCHAR.alpha)
        self.assertEqual(klobuchar.beta, DEFAULT_KLOBUCHAR.beta)

    def test_written_navigation_parses_back(self):
        origin = (0.76, -1.39, 150.0)
        ephemerides = synthetic_constellation(origin, T0)
        with tempfile.TemporaryDirectory() as tmp:
            path = Path(tmp) / "sim.nav"
            write_rinex_nav(ephemerides, path, DEFAULT_KLOBUCHAR)
            parsed, klobuchar = parse_rinex_nav(path)
        self.assertEqual(klobuchar, DEFAULT_KLOBUCHAR)
        by_id = {e.sat_id: e for e in parsed}
        self.assertEqual(sorted(by_id), sorted(e.sat_id for e in ephemerides))
        for original in ephemerides:
            back = by_id[original.sat_id]
            self.assertEqual(back.toe, original.toe)
            for name in ("sqrt_a", "i0", "omega0", "m0", "af0", "af1"):
                self.assertAlmostEqual(getattr(back, name), getattr(original, name), delta=1e-11 * max(1.0, abs(getattr(original, name))))

    def test_header_without_ionosphere(self):
        with tempfile.TemporaryDirectory() as tmp:
            path = Path(tmp) / "plain.nav"
            write_rinex_nav(synthetic_constellation((0.76, -1.39, 150.0), T0)[:1], path)
            _, klobuchar = parse_rinex_nav(path)
        self.assertIsNone(klobuchar)

    def test_refuses_empty(self):
        with tempfile.TemporaryDirectory() as tmp:
            with self.assertRaises(RinexFormatError):
                write_rinex_nav([], Path(tmp) / "x.nav")
