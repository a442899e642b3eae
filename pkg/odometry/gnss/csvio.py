# odometry/gnss/csvio.py
"""
CSV readers and writers: ground truth, relative poses and trajectories.

All writers use fixed float formats so that identical inputs produce
byte-identical files.
"""
import logging

import numpy as np
import pandas as pd
from scipy.spatial.transform import Rotation

from .exceptions import EvaluationError, FactorError, TruthFileError
from .frames import GpsTime
from .lie import Pose, StateNode, Trajectory, se3_exp, se3_log
from .observations import GroundTruthSample, RelPoseMeasurement, check_truth_monotone

logger = logging.getLogger('odometry')

FLOAT_FORMAT = "%.9f"

TRUTH_COLUMNS = ["week", "sow", "east_m", "north_m", "up_m", "flag"]
REL_POSE_COLUMNS = (["week_a", "sow_a", "week_b", "sow_b"]
                    + [f"xi{i}" for i in range(1, 7)]
                    + [f"cov{i}{j}" for i in range(1, 7) for j in range(1, 7)])
TRAJECTORY_COLUMNS = [
    "week", "sow",
    "east_m", "north_m", "up_m",                    # receiver antenna
    "vehicle_east_m", "vehicle_north_m", "vehicle_up_m",
    "qw", "qx", "qy", "qz",                         # vehicle attitude
    "v_x", "v_y", "v_z", "w_x", "w_y", "w_z",       # body-frame twist
]


def _read(path, columns, error_cls):
    try:
        frame = pd.read_csv(path)
    except (OSError, pd.errors.ParserError, pd.errors.EmptyDataError, UnicodeDecodeError) as exc:
        raise error_cls(f"cannot read {path}", reason=str(exc)) from exc
    missing = [c for c in columns if c not in frame.columns]
    if missing:
        raise error_cls("CSV is missing required columns", path=str(path), missing=missing)
    if frame[columns].isna().any().any():
        raise error_cls("CSV contains empty cells", path=str(path))
    return frame


def _times(weeks, sows):
    return [GpsTime.from_week_sow(int(w), float(s)) for w, s in zip(weeks, sows)]


def write_table(frame, path):
    frame.to_csv(path, index=False, float_format=FLOAT_FORMAT, lineterminator="\n")


# ==============================================================================
# GROUND TRUTH
# ==============================================================================

def parse_ground_truth(path):
    """Read ``week,sow,east_m,north_m,up_m,flag`` rows; timestamps must strictly increase."""
    frame = _read(path, TRUTH_COLUMNS, TruthFileError)
    times = _times(frame["week"], frame["sow"])
    positions = frame[["east_m", "north_m", "up_m"]].to_numpy(dtype=float)
    samples = [GroundTruthSample(t, p, int(f))
               for t, p, f in zip(times, positions, frame["flag"])]
    check_truth_monotone(samples)
    if not samples:
        raise TruthFileError("ground-truth file has no rows", path=str(path))
    logger.info(f"Parsed {len(samples)} ground-truth samples from {path}.")
    return samples


def write_ground_truth(samples, path):
    rows = [{"week": s.t.week, "sow": s.t.sow,
             "east_m": s.position[0], "north_m": s.position[1], "up_m": s.position[2],
             "flag": int(s.flag)} for s in samples]
    write_table(pd.DataFrame(rows, columns=TRUTH_COLUMNS), path)


# ==============================================================================
# RELATIVE POSES
# ==============================================================================

def parse_rel_pose(path):
    """Read relative-pose measurements; ``xi`` is the se(3) logarithm of T_ab."""
    frame = _read(path, REL_POSE_COLUMNS, FactorError)
    t_a = _times(frame["week_a"], frame["sow_a"])
    t_b = _times(frame["week_b"], frame["sow_b"])
    xi = frame[[f"xi{i}" for i in range(1, 7)]].to_numpy(dtype=float)
    cov = frame[[c for c in REL_POSE_COLUMNS if c.startswith("cov")]].to_numpy(dtype=float)
    measurements = [RelPoseMeasurement(a, b, se3_exp(x), c.reshape(6, 6))
                    for a, b, x, c in zip(t_a, t_b, xi, cov)]
    logger.info(f"Parsed {len(measurements)} relative-pose measurements from {path}.")
    return measurements


def write_rel_pose(measurements, path):
    rows = []
    for m in measurements:
        row = {"week_a": m.t_a.week, "sow_a": m.t_a.sow, "week_b": m.t_b.week, "sow_b": m.t_b.sow}
        row.update({f"xi{i + 1}": v for i, v in enumerate(se3_log(m.T_ab))})
        row.update({f"cov{i + 1}{j + 1}": m.covariance[i, j] for i in range(6) for j in range(6)})
        rows.append(row)
    write_table(pd.DataFrame(rows, columns=REL_POSE_COLUMNS), path)


# ==============================================================================
# TRAJECTORIES
# ==============================================================================

def export_trajectory(traj, path, lever_arm=(0.0, 0.0, 0.0)):
    """
    Write one row per node: receiver antenna position, vehicle position,
    attitude quaternion (w, x, y, z) and body-frame twist.
    """
    if len(traj) == 0:
        raise EvaluationError("cannot export an empty trajectory")
    lever = np.asarray(lever_arm, dtype=float)
    rows = []
    for node in traj:
        receiver = node.receiver_position(lever)
        x, y, z, w = Rotation.from_matrix(node.pose.rotation).as_quat()
        if w < 0.0:
            x, y, z, w = -x, -y, -z, -w
        rows.append([node.t.week, node.t.sow, *receiver, *node.pose.translation,
                     w, x, y, z, *node.twist])
    frame = pd.DataFrame(rows, columns=TRAJECTORY_COLUMNS)
    frame["week"] = frame["week"].astype(int)
    write_table(frame, path)
    logger.info(f"Exported {len(traj)} trajectory nodes to {path}.")


def read_trajectory(path, frame="vehicle"):
    """
    Read an exported trajectory back.

    ``frame="vehicle"`` returns the vehicle poses; ``frame="receiver"`` returns
    the same attitudes anchored at the receiver antenna positions.
    """
    table = _read(path, TRAJECTORY_COLUMNS[:5], EvaluationError)
    if frame not in ("vehicle", "receiver"):
        raise EvaluationError("unknown trajectory frame", frame=frame)
    has_attitude = all(c in table.columns for c in TRAJECTORY_COLUMNS)
    times = _times(table["week"], table["sow"])

    nodes = []
    for k, t in enumerate(times):
        row = table.iloc[k]
        if has_attitude:
            rotation = Rotation.from_quat([row["qx"], row["qy"], row["qz"], row["qw"]]).as_matrix()
            twist = row[["v_x", "v_y", "v_z", "w_x", "w_y", "w_z"]].to_numpy(dtype=float)
            columns = (["east_m", "north_m", "up_m"] if frame == "receiver"
                       else ["vehicle_east_m", "vehicle_north_m", "vehicle_up_m"])
        else:
            rotation, twist = np.eye(3), np.zeros(6)
            columns = ["east_m", "north_m", "up_m"]
        translation = row[columns].to_numpy(dtype=float)
        nodes.append(StateNode(t, Pose(rotation, translation), twist))
    if not nodes:
        raise EvaluationError("trajectory file has no rows", path=str(path))
    return Trajectory(nodes)
