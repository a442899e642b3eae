# odometry/gnss/experiment.py
"""
Matched-seed comparisons of the estimator and the baselines.

A case is one (scenario, seed) simulation; every requested algorithm is run
on the same simulated epochs and evaluated against the same truth. Nothing in
here touches the database; ``odometry.services`` fans cases out over threads
and persists the summaries.
"""
import logging
import math
import time
from dataclasses import dataclass, field, replace
from pathlib import Path

import pandas as pd

from .atmosphere import AtmosphereModel
from .baselines import doppler_odometry, pseudorange_odometry, relative_pose_odometry
from .config import GraphConfig, Topology
from .csvio import write_table
from .ephemeris import EphemerisStore
from .evaluation import (
    align_segment,
    availability,
    epoch_final_error,
    evaluate_trajectory,
    final_error,
    rms_horizontal_error,
)
from .exceptions import ConfigurationError, EvaluationError, OdometryError
from .pipeline import TdcpOdometry, estimate_trajectory
from .plots import plot_error_curves, plot_overhead, plot_satellite_scatter
from .simulator import simulate

logger = logging.getLogger('odometry')

TDCP_VARIANTS = {
    "tdcp": dict(tdcp_topology=Topology.CONSECUTIVE, use_rel_pose_factors=False),
    "tdcp_dense": dict(tdcp_topology=Topology.DENSE, use_rel_pose_factors=False),
    "tdcp_relpose": dict(tdcp_topology=Topology.CONSECUTIVE, use_rel_pose_factors=True),
}
BASELINES = ("pseudorange", "doppler", "relpose")

SUMMARY_COLUMNS = [
    "scenario", "seed", "algorithm", "status", "final_error_m", "mean_error_25_m", "mean_error_50_m",
    "drift_percent", "mean_r_squared", "sections", "pseudorange_rms_m",
    "satellites_min", "satellites_median", "satellites_max", "satellite_correlation", "flagged_epochs",
]


@dataclass
class AlgorithmOutcome:
    scenario: str
    seed: int
    algorithm: str
    trajectory: object = None          # receiver-antenna Trajectory
    report: object = None              # DriftReport, None when sections could not be cut
    final_error: float = math.nan
    pseudorange_rms: float = math.nan
    satellites: dict = field(default_factory=dict)
    flagged_epochs: int = 0
    wall_time: float = 0.0             # s, kept out of every written file
    error: str = ""

    @property
    def ok(self):
        return not self.error

    def summary_row(self):
        report = self.report
        sats = availability(self.satellites.values())
        return {
            "scenario": self.scenario,
            "seed": self.seed,
            "algorithm": self.algorithm,
            "status": "ok" if self.ok else self.error,
            "final_error_m": self.final_error,
            "mean_error_25_m": report.mean_error_25 if report else math.nan,
            "mean_error_50_m": report.mean_error_50 if report else math.nan,
            "drift_percent": report.drift_percent if report else math.nan,
            "mean_r_squared": report.mean_r_squared if report else math.nan,
            "sections": len(report.sections) if report else 0,
            "pseudorange_rms_m": self.pseudorange_rms,
            "satellites_min": sats["min"],
            "satellites_median": sats["median"],
            "satellites_max": sats["max"],
            "satellite_correlation": report.satellite_correlation() if report else math.nan,
            "flagged_epochs": self.flagged_epochs,
        }


@dataclass
class CaseResult:
    scenario: str
    seed: int
    truth: list
    outcomes: list = field(default_factory=list)


@dataclass(frozen=True)
class EvaluationSettings:
    sections: int = 15
    section_length: float = 50.0
    align_span: float = 10.0


def graph_config_for(algorithm, base, lever_arm=None):
    """Estimator configuration for one named variant, with the scenario's lever arm."""
    if algorithm not in TDCP_VARIANTS and algorithm not in BASELINES:
        raise ConfigurationError("unknown algorithm", algorithm=algorithm)
    overrides = dict(TDCP_VARIANTS.get(algorithm, {}))
    if lever_arm is not None:
        overrides["lever_arm"] = tuple(float(v) for v in lever_arm)
    return replace(base, **overrides)


def run_algorithm(simulation, algorithm, base_config=None):
    """
    Run one algorithm on a simulation's epochs.

    Returns ``(receiver trajectory, {GpsTime: satellites used}, flagged epoch count)``.
    """
    base_config = base_config or GraphConfig()
    budget = simulation.budget
    config = graph_config_for(algorithm, base_config, simulation.scenario.extrinsics.r_rv_v).matched_to(budget)
    store = EphemerisStore(simulation.ephemerides)
    epochs = simulation.observations

    if algorithm in TDCP_VARIANTS:
        odometry = estimate_trajectory(epochs, store, config, simulation.klobuchar, simulation.rel_poses)
        counts = {d.t: d.satellites for d in odometry.diagnostics}
        return odometry.trajectory().receiver_frame(config.lever_arm), counts, 0

    counts = {epoch.t: len(epoch) for epoch in epochs}
    # Single-epoch baselines apply every broadcast correction the budget simulated.
    atmosphere = AtmosphereModel(klobuchar=simulation.klobuchar, use_iono=budget.apply_iono,
                                 use_tropo=budget.apply_tropo)
    if algorithm == "pseudorange":
        run = pseudorange_odometry(epochs, store, frame=simulation.frame, atmosphere=atmosphere)
    elif algorithm == "doppler":
        run = doppler_odometry(epochs, store, atmosphere=atmosphere)
    else:
        start, _ = TdcpOdometry(store, config, simulation.klobuchar).initialize(epochs[:2])
        run = relative_pose_odometry(simulation.rel_poses, start.pose, config.lever_arm)
    return run.trajectory, counts, len(run.flagged)


def evaluate_outcome(outcome, truth, evaluation):
    """Fill in the drift report and final error; a run too short for sections keeps ``report=None``."""
    traj = outcome.trajectory
    try:
        outcome.report = evaluate_trajectory(
            traj, truth, evaluation.sections, evaluation.section_length, evaluation.align_span,
            algorithm=outcome.algorithm, satellite_counts=outcome.satellites)
    except EvaluationError as exc:
        logger.info(f"No drift sections for {outcome.algorithm} on '{outcome.scenario}': {exc.message}.")
    if outcome.algorithm == "pseudorange":
        # Independent fixes are scored in the shared ENU frame, without alignment.
        outcome.final_error = epoch_final_error(traj, truth)
        outcome.pseudorange_rms = rms_horizontal_error(traj, truth)
    else:
        outcome.final_error = final_error(traj, truth, evaluation.align_span)
    return outcome


def run_case_algorithm(simulation, algorithm, base_config, evaluation):
    """One algorithm on one simulated case; engine failures are recorded, not raised."""
    scenario = simulation.scenario
    outcome = AlgorithmOutcome(scenario.name, scenario.seed, algorithm)
    started = time.perf_counter()
    try:
        outcome.trajectory, outcome.satellites, outcome.flagged_epochs = run_algorithm(
            simulation, algorithm, base_config)
        outcome.wall_time = time.perf_counter() - started
        evaluate_outcome(outcome, simulation.truth, evaluation)
    except OdometryError as exc:
        logger.error(f"{algorithm} failed on '{scenario.name}' seed {scenario.seed}: "
                     f"{exc.code}: {exc.message}")
        outcome.error = exc.code
    return outcome


def simulate_case(scenario, budget, seed):
    return simulate(scenario.with_seed(seed), budget)


# ==============================================================================
# REPORTS
# ==============================================================================

def summary_frame(cases):
    rows = [o.summary_row() for case in cases for o in case.outcomes]
    return pd.DataFrame(rows, columns=SUMMARY_COLUMNS)


def aggregate_frame(summary):
    """Mean and spread of the headline numbers per (scenario, algorithm) over seeds."""
    ok = summary[summary["status"] == "ok"]
    grouped = ok.groupby(["scenario", "algorithm"], sort=True)
    frame = grouped.agg(
        runs=("seed", "count"),
        final_error_mean_m=("final_error_m", "mean"),
        final_error_std_m=("final_error_m", "std"),
        mean_error_25_m=("mean_error_25_m", "mean"),
        mean_error_50_m=("mean_error_50_m", "mean"),
        drift_percent=("drift_percent", "mean"),
        mean_r_squared=("mean_r_squared", "mean"),
        pseudorange_rms_m=("pseudorange_rms_m", "mean"),
    )
    return frame.reset_index()


def _case_frames(cases, method):
    frames = []
    for case in cases:
        for outcome in case.outcomes:
            if outcome.report is None:
                continue
            frame = getattr(outcome.report, method)()
            frame.insert(0, "seed", case.seed)
            frame.insert(0, "scenario", case.scenario)
            frames.append(frame)
    return pd.concat(frames, ignore_index=True) if frames else pd.DataFrame()


def _aligned(outcome, truth, align_span):
    alignment = align_segment(outcome.trajectory, truth, align_span)
    return outcome.trajectory.transformed(alignment.transform)


def write_outputs(cases, out_dir, evaluation=None):
    """
    Write the suite's CSV tables and SVG figures under ``out_dir``.

    Everything written depends only on the suite and its seeds.
    """
    evaluation = evaluation or EvaluationSettings()
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    summary = summary_frame(cases)
    paths = {"summary": out / "summary.csv", "aggregate": out / "aggregate.csv",
             "sections": out / "sections.csv", "curves": out / "curves.csv", "figures": []}
    write_table(summary, paths["summary"])
    write_table(aggregate_frame(summary), paths["aggregate"])
    write_table(_case_frames(cases, "sections_frame"), paths["sections"])
    write_table(_case_frames(cases, "curves_frame"), paths["curves"])

    by_scenario = {}
    for case in cases:
        by_scenario.setdefault(case.scenario, []).append(case)
    for name, scenario_cases in by_scenario.items():
        reports = [o.report for c in scenario_cases for o in c.outcomes if o.report is not None]
        if reports:
            paths["figures"].append(plot_error_curves(reports, out / f"{name}_error_curves.svg",
                                                      title=f"Position drift: {name}"))
            paths["figures"].append(plot_satellite_scatter(reports, out / f"{name}_satellites.svg"))
        first = scenario_cases[0]
        estimates = {}
        for outcome in first.outcomes:
            if not outcome.ok:
                continue
            try:
                estimates[outcome.algorithm] = _aligned(outcome, first.truth, evaluation.align_span)
            except EvaluationError:
                continue
        if estimates:
            paths["figures"].append(plot_overhead(first.truth, estimates, out / f"{name}_overhead.svg",
                                                  title=f"{name}, seed {first.seed}"))
    logger.info(f"Wrote {len(summary)} run summaries and {len(paths['figures'])} figures to {out}.")
    return paths
