# odometry/tests/test_csvio.py
import tempfile
from pathlib import Path

import numpy as np
import pandas as pd
from django.test import SimpleTestCase

from odometry.gnss.csvio import (
    TRUTH_COLUMNS,
    export_trajectory,
    parse_ground_truth,
    parse_rel_pose,
    read_trajectory,
    write_ground_truth,
    write_rel_pose,
)
from odometry.gnss.exceptions import EvaluationError, FactorError, TruthFileError
from odometry.gnss.frames import GpsTime
from odometry.gnss.lie import Pose, StateNode, Trajectory, se3_exp
from odometry.gnss.observations import GroundTruthSample, RelPoseMeasurement

T0 = GpsTime.from_week_sow(2316, 572400.0)


class CsvTestCase(SimpleTestCase):
    def setUp(self):
        self._tmp = tempfile.TemporaryDirectory()
        self.tmp = Path(self._tmp.name)

    def tearDown(self):
        self._tmp.cleanup()


class GroundTruthTests(CsvTestCase):
    def test_write_then_parse(self):
        samples = [GroundTruthSample(T0 + 0.5 * k, np.array([k, 2.0 * k, 0.1]), 1) for k in range(4)]
        path = self.tmp / "truth.csv"
        write_ground_truth(samples, path)
        parsed = parse_ground_truth(path)
        self.assertEqual([s.t for s in parsed], [s.t for s in samples])
        np.testing.assert_allclose([s.position for s in parsed], [s.position for s in samples])

    def test_non_increasing_timestamps(self):
        path = self.tmp / "truth.csv"
        path.write_text(",".join(TRUTH_COLUMNS) + "\n2316,10.0,0,0,0,1\n2316,10.0,1,0,0,1\n")
        with self.assertRaises(TruthFileError):
            parse_ground_truth(path)

    def test_missing_columns_and_empty_cells(self):
        path = self.tmp / "truth.csv"
        path.write_text("week,sow,east_m\n2316,10.0,0\n")
        with self.assertRaises(TruthFileError):
            parse_ground_truth(path)
        path.write_text(",".join(TRUTH_COLUMNS) + "\n2316,10.0,,0,0,1\n")
        with self.assertRaises(TruthFileError):
            parse_ground_truth(path)

    def test_unreadable_file(self):
        with self.assertRaises(TruthFileError):
            parse_ground_truth(self.tmp / "nope.csv")


class RelPoseTests(CsvTestCase):
    def test_write_then_parse(self):
        cov = np.diag([0.01, 0.01, 0.04, 1e-4, 1e-4, 1e-3])
        measurement = RelPoseMeasurement(T0, T0 + 1.0, se3_exp([1.0, 0.1, 0.0, 0.0, 0.0, 0.05]), cov)
        path = self.tmp / "rel.csv"
        write_rel_pose([measurement], path)
        [back] = parse_rel_pose(path)
        self.assertEqual((back.t_a, back.t_b), (T0, T0 + 1.0))
        np.testing.assert_allclose(back.T_ab.matrix(), measurement.T_ab.matrix(), atol=1e-8)
        np.testing.assert_allclose(back.covariance, cov, atol=1e-9)

    def test_measurement_validation(self):
        with self.assertRaises(FactorError):
            RelPoseMeasurement(T0 + 1.0, T0, Pose())
        with self.assertRaises(FactorError):
            RelPoseMeasurement(T0, T0 + 1.0, Pose(), -np.eye(6))
        asymmetric = np.eye(6)
        asymmetric[0, 1] = 0.5
        with self.assertRaises(FactorError):
            RelPoseMeasurement(T0, T0 + 1.0, Pose(), asymmetric)


class TrajectoryFileTests(CsvTestCase):
    def setUp(self):
        super().setUp()
        self.lever = np.array([0.5, 0.0, 1.0])
        self.traj = Trajectory(
            StateNode(T0 + k, Pose.from_yaw(0.3 * k, [2.0 * k, -1.0, 0.2]),
                      np.array([2.0, 0.0, 0.0, 0.0, 0.0, 0.3]))
            for k in range(5))

    def test_export_then_read_both_frames(self):
        path = self.tmp / "traj.csv"
        export_trajectory(self.traj, path, self.lever)
        vehicle = read_trajectory(path)
        receiver = read_trajectory(path, frame="receiver")
        for original, v, r in zip(self.traj, vehicle, receiver):
            self.assertEqual(v.t, original.t)
            np.testing.assert_allclose(v.pose.translation, original.pose.translation, atol=1e-9)
            np.testing.assert_allclose(v.pose.rotation, original.pose.rotation, atol=1e-8)
            np.testing.assert_allclose(r.pose.translation, original.receiver_position(self.lever), atol=1e-9)
            np.testing.assert_allclose(v.twist, original.twist, atol=1e-9)

    def test_quaternion_has_non_negative_scalar(self):
        path = self.tmp / "traj.csv"
        export_trajectory(self.traj, path)
        self.assertTrue((pd.read_csv(path)["qw"] >= 0.0).all())

    def test_export_is_byte_identical(self):
        a, b = self.tmp / "a.csv", self.tmp / "b.csv"
        export_trajectory(self.traj, a, self.lever)
        export_trajectory(self.traj, b, self.lever)
        self.assertEqual(a.read_bytes(), b.read_bytes())

    def test_position_only_file(self):
        path = self.tmp / "positions.csv"
        path.write_text("week,sow,east_m,north_m,up_m\n2316,572400.0,1.0,2.0,3.0\n2316,572401.0,2.0,2.0,3.0\n")
        traj = read_trajectory(path)
        self.assertEqual(len(traj), 2)
        np.testing.assert_allclose(traj[1].pose.translation, [2.0, 2.0, 3.0])
        np.testing.assert_allclose(traj[1].pose.rotation, np.eye(3))

    def test_errors(self):
        with self.assertRaises(EvaluationError):
            export_trajectory(Trajectory(), self.tmp / "empty.csv")
        path = self.tmp / "traj.csv"
        export_trajectory(self.traj, path)
        with self.assertRaises(EvaluationError):
            read_trajectory(path, frame="camera")
