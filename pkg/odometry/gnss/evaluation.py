# odometry/gnss/evaluation.py
"""
Drift evaluation: estimates are cut into sections of fixed length along the
truth path, each section rigidly aligned on the stretch of path just before
it, and the horizontal error recorded against distance travelled.
"""
import logging
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
import pandas as pd
from scipy import linalg

from .csvio import write_table
from .exceptions import EvaluationError, LieGroupError
from .lie import Pose, interpolate_pose

logger = logging.getLogger('odometry')

COLLINEAR_TOLERANCE = 1e-3  # m
MIN_ALIGNMENT_SAMPLES = 3


@dataclass(frozen=True, eq=False)
class Alignment:
    transform: Pose
    fallback: bool = False
    samples: int = 0


@dataclass(frozen=True, eq=False)
class SectionDrift:
    section: int
    start_distance: float
    distances: np.ndarray
    horizontal_errors: np.ndarray
    errors_3d: np.ndarray
    error_25: float
    error_50: float
    r_squared: float
    alignment_fallback: bool = False
    mean_satellites: float = math.nan


@dataclass
class DriftReport:
    algorithm: str = ""
    section_length: float = 50.0
    sections: list = field(default_factory=list)

    def _values(self, name):
        return np.array([getattr(s, name) for s in self.sections], dtype=float)

    @property
    def mean_error_25(self):
        return float(np.mean(self._values("error_25")))

    @property
    def mean_error_50(self):
        return float(np.mean(self._values("error_50")))

    @property
    def drift_percent(self):
        """Mean error at the section end as a percentage of the section length."""
        return 100.0 * self.mean_error_50 / self.section_length

    def percentile(self, q, name="error_50"):
        return float(np.percentile(self._values(name), q))

    @property
    def mean_r_squared(self):
        return float(np.mean(self._values("r_squared")))

    def satellite_correlation(self):
        """Pearson r between per-section mean satellite count and final error, or NaN."""
        sats, errors = self._values("mean_satellites"), self._values("error_50")
        mask = np.isfinite(sats)
        if mask.sum() < 3 or np.std(sats[mask]) == 0.0 or np.std(errors[mask]) == 0.0:
            return math.nan
        return float(np.corrcoef(sats[mask], errors[mask])[0, 1])

    def summary(self):
        return {
            "algorithm": self.algorithm,
            "sections": len(self.sections),
            "mean_error_25": self.mean_error_25,
            "mean_error_50": self.mean_error_50,
            "median_error_50": self.percentile(50),
            "p90_error_50": self.percentile(90),
            "drift_percent": self.drift_percent,
            "mean_r_squared": self.mean_r_squared,
            "satellite_correlation": self.satellite_correlation(),
        }

    def sections_frame(self):
        return pd.DataFrame([{
            "algorithm": self.algorithm,
            "section": s.section,
            "start_m": s.start_distance,
            "error_25_m": s.error_25,
            "error_50_m": s.error_50,
            "r_squared": s.r_squared,
            "mean_satellites": s.mean_satellites,
            "alignment_fallback": int(s.alignment_fallback),
        } for s in self.sections])

    def curves_frame(self):
        rows = []
        for s in self.sections:
            for d, h, e3 in zip(s.distances, s.horizontal_errors, s.errors_3d):
                rows.append({"algorithm": self.algorithm, "section": s.section,
                             "distance_m": d, "horizontal_error_m": h, "error_3d_m": e3})
        return pd.DataFrame(rows, columns=["algorithm", "section", "distance_m",
                                           "horizontal_error_m", "error_3d_m"])


# ==============================================================================
# TRUTH GEOMETRY
# ==============================================================================

def arc_lengths(truth):
    positions = np.array([s.position for s in truth], dtype=float)
    steps = np.linalg.norm(np.diff(positions, axis=0), axis=1)
    return np.concatenate([[0.0], np.cumsum(steps)])


def estimate_positions(estimate, times):
    """Estimate positions at ``times``; NaN rows where the estimate does not cover them."""
    out = np.full((len(times), 3), np.nan)
    for i, t in enumerate(times):
        try:
            out[i] = interpolate_pose(estimate, t).translation
        except LieGroupError:
            continue
    return out


def _window(distance, start, stop):
    return np.flatnonzero((distance >= start - 1e-9) & (distance <= stop + 1e-9))


# ==============================================================================
# ALIGNMENT
# ==============================================================================

def rigid_fit(source, target):
    """Least-squares rotation + translation (no scale) taking ``source`` onto ``target``."""
    p_mean, q_mean = source.mean(axis=0), target.mean(axis=0)
    H = (source - p_mean).T @ (target - q_mean)
    U, _, Vt = linalg.svd(H)
    d = np.sign(np.linalg.det(Vt.T @ U.T)) or 1.0
    R = Vt.T @ np.diag([1.0, 1.0, d]) @ U.T
    return Pose(R, q_mean - R @ p_mean)


def heading_fit(source, target):
    """Translation plus rotation about the vertical, for degenerate alignment spans."""
    p_mean, q_mean = source.mean(axis=0), target.mean(axis=0)
    ds, dt = source[-1] - source[0], target[-1] - target[0]
    yaw = 0.0
    if math.hypot(ds[0], ds[1]) > COLLINEAR_TOLERANCE and math.hypot(dt[0], dt[1]) > COLLINEAR_TOLERANCE:
        yaw = math.atan2(dt[1], dt[0]) - math.atan2(ds[1], ds[0])
    R = Pose.from_yaw(yaw).rotation
    return Pose(R, q_mean - R @ p_mean)


def align_segment(estimate, truth, align_span=10.0, section_start=None):
    """
    Rigid transform fitted on the ``align_span`` metres of truth preceding
    ``section_start`` (default: the first ``align_span`` metres of the run).
    """
    distance = arc_lengths(truth)
    start = align_span if section_start is None else section_start
    idx = _window(distance, start - align_span, start)
    times = [truth[i].t for i in idx]
    source = estimate_positions(estimate, times)
    valid = np.all(np.isfinite(source), axis=1)
    if valid.sum() < MIN_ALIGNMENT_SAMPLES:
        raise EvaluationError("fewer than three truth samples inside the alignment span",
                              start=start, samples=int(valid.sum()))
    source = source[valid]
    target = np.array([truth[i].position for i in idx[valid]], dtype=float)

    spread = linalg.svd(source - source.mean(axis=0), compute_uv=False)
    if len(spread) < 2 or spread[1] < COLLINEAR_TOLERANCE:
        return Alignment(heading_fit(source, target), fallback=True, samples=len(source))
    return Alignment(rigid_fit(source, target), samples=len(source))


# ==============================================================================
# SECTIONS AND DRIFT
# ==============================================================================

def cut_sections(total_length, count=15, section_length=50.0, align_span=10.0):
    """Equally spaced section start distances, leaving room for the alignment span."""
    first, last = align_span, total_length - section_length
    if last < first:
        raise EvaluationError("truth path too short for the requested sections",
                              length=float(total_length), needed=align_span + section_length)
    if count <= 1:
        return [first]
    return [first + j * (last - first) / (count - 1) for j in range(count)]


def _r_squared(x, y):
    if len(x) < 3:
        return 1.0
    slope, intercept = np.polyfit(x, y, 1)
    residual = y - (slope * x + intercept)
    total = float(np.sum((y - y.mean()) ** 2))
    return 1.0 if total == 0.0 else 1.0 - float(np.sum(residual ** 2)) / total


def drift_metrics(aligned, truth, section_start=0.0, section_length=50.0, section=0,
                  satellite_counts=None):
    """
    Error-vs-distance curve over one section of an already aligned estimate.

    ``satellite_counts`` optionally maps GpsTime -> satellites used, for the
    per-section availability mean.
    """
    distance = arc_lengths(truth)
    if distance[-1] < section_start + section_length - 1e-9:
        raise EvaluationError("section extends past the end of the truth path",
                              start=section_start, length=section_length, available=float(distance[-1]))
    idx = _window(distance, section_start, section_start + section_length)
    times = [truth[i].t for i in idx]
    estimated = estimate_positions(aligned, times)
    valid = np.all(np.isfinite(estimated), axis=1)
    if valid.sum() < 2:
        raise EvaluationError("estimate does not cover the section", start=section_start)
    idx, estimated = idx[valid], estimated[valid]
    truth_pos = np.array([truth[i].position for i in idx], dtype=float)
    delta = estimated - truth_pos
    d = distance[idx] - section_start
    horizontal = np.hypot(delta[:, 0], delta[:, 1])
    errors_3d = np.linalg.norm(delta, axis=1)

    mean_sats = math.nan
    if satellite_counts:
        t0, t1 = truth[idx[0]].t, truth[idx[-1]].t
        counts = [n for t, n in satellite_counts.items() if t0 <= t <= t1]
        if counts:
            mean_sats = float(np.mean(counts))

    return SectionDrift(
        section=section,
        start_distance=float(section_start),
        distances=d,
        horizontal_errors=horizontal,
        errors_3d=errors_3d,
        error_25=float(np.interp(0.5 * section_length, d, horizontal)),
        error_50=float(np.interp(section_length, d, horizontal)),
        r_squared=_r_squared(d, horizontal),
        mean_satellites=mean_sats,
    )


def evaluate_trajectory(estimate, truth, sections=15, section_length=50.0, align_span=10.0,
                        algorithm="", satellite_counts=None):
    """Cut, align and measure every section; ``estimate`` holds receiver-antenna poses."""
    if len(estimate) == 0:
        raise EvaluationError("cannot evaluate an empty trajectory")
    starts = cut_sections(arc_lengths(truth)[-1], sections, section_length, align_span)
    report = DriftReport(algorithm=algorithm, section_length=section_length)
    for j, start in enumerate(starts):
        alignment = align_segment(estimate, truth, align_span, section_start=start)
        drift = drift_metrics(estimate.transformed(alignment.transform), truth, start, section_length,
                              section=j, satellite_counts=satellite_counts)
        if alignment.fallback:
            drift = replace(drift, alignment_fallback=True)
        report.sections.append(drift)
    logger.info(f"Evaluated {algorithm or 'estimate'}: {len(starts)} sections, "
                f"mean 50 m error {report.mean_error_50:.3f} m ({report.drift_percent:.2f}%).")
    return report


def final_error(estimate, truth, align_span=10.0):
    """Horizontal error at the last covered truth sample after aligning on the first metres."""
    alignment = align_segment(estimate, truth, align_span)
    return epoch_final_error(estimate.transformed(alignment.transform), truth)


def epoch_final_error(estimate, truth):
    """Horizontal error at the last covered truth sample, unaligned; both must share one ENU frame."""
    for sample in reversed(truth):
        position = estimate_positions(estimate, [sample.t])[0]
        if np.all(np.isfinite(position)):
            delta = position - sample.position
            return float(math.hypot(delta[0], delta[1]))
    raise EvaluationError("estimate does not overlap the truth")


def rms_horizontal_error(estimate, truth):
    """RMS horizontal error without alignment; both must share one ENU frame."""
    positions = estimate_positions(estimate, [s.t for s in truth])
    valid = np.all(np.isfinite(positions), axis=1)
    if not valid.any():
        raise EvaluationError("estimate does not overlap the truth")
    delta = positions[valid] - np.array([s.position for s in truth], dtype=float)[valid]
    return float(np.sqrt(np.mean(delta[:, 0] ** 2 + delta[:, 1] ** 2)))


def availability(counts):
    """min/median/max satellites per epoch."""
    values = np.asarray(list(counts), dtype=float)
    if values.size == 0:
        return {"min": 0, "median": 0.0, "max": 0}
    return {"min": int(values.min()), "median": float(np.median(values)), "max": int(values.max())}


def write_report(report, path):
    """Section table at ``path`` and error curves next to it as ``<stem>_curves.csv``."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    write_table(report.sections_frame(), path)
    curves = path.with_name(f"{path.stem}_curves.csv")
    write_table(report.curves_frame(), curves)
    return path, curves
