# odometry/services.py
"""
Workflows behind the management commands and the REST endpoints: file-based
simulate / estimate / baseline / eval, and experiment suites with persisted
summaries.
"""
import asyncio
import logging
import math
import os
import time
from pathlib import Path

import pandas as pd
import yaml
from django.conf import settings
from django.db import DatabaseError, transaction
from django.utils import timezone
from django.utils.text import slugify
from PIL import Image, ImageDraw, ImageFont

from .gnss.atmosphere import AtmosphereModel
from .gnss.baselines import doppler_odometry, pseudorange_odometry, relative_pose_odometry
from .gnss.config import GraphConfig, load_scenario, load_suite
from .gnss.csvio import (
    export_trajectory,
    parse_ground_truth,
    parse_rel_pose,
    read_trajectory,
    write_table,
)
from .gnss.ephemeris import EphemerisStore
from .gnss.evaluation import evaluate_trajectory, final_error, write_report
from .gnss.exceptions import BaselineError, ConfigurationError
from .gnss.experiment import (
    CaseResult,
    EvaluationSettings,
    aggregate_frame,
    run_case_algorithm,
    simulate_case,
    summary_frame,
    write_outputs,
)
from .gnss.pipeline import TdcpOdometry, estimate_trajectory
from .gnss.rinex import parse_rinex_nav, parse_rinex_obs
from .gnss.simulator import simulate, write_simulation
from .models import AlgorithmRun, ExperimentSuite

logger = logging.getLogger('odometry')

BASELINE_METHODS = ("pseudorange", "doppler", "relpose")


# ==============================================================================
# FILE WORKFLOWS
# ==============================================================================

def simulate_to_files(config_source, out_dir, seed=None):
    """Simulate one scenario and write obs, nav, truth and rel-pose files."""
    scenario, budget = load_scenario(config_source)
    if seed is not None:
        scenario = scenario.with_seed(seed)
    result = simulate(scenario, budget)
    paths = write_simulation(result, out_dir)
    logger.info(f"Simulation '{scenario.name}' written to {out_dir}.")
    return paths


def _load_inputs(obs_path, nav_path):
    epochs = parse_rinex_obs(obs_path)
    ephemerides, klobuchar = parse_rinex_nav(nav_path)
    return epochs, EphemerisStore(ephemerides), klobuchar


def graph_config(**overrides):
    """``GraphConfig.from_settings`` with unknown keys reported as a configuration error."""
    try:
        return GraphConfig.from_settings(**overrides)
    except TypeError as exc:
        raise ConfigurationError("unknown estimator option", reason=str(exc)) from exc


def estimate_files(obs_path, nav_path, out_path, rel_pose_path=None, **overrides):
    """
    Run the TDCP estimator on RINEX files and export the trajectory.

    Per-epoch solver diagnostics go next to the trajectory as
    ``<stem>_diagnostics.csv``.
    """
    epochs, store, klobuchar = _load_inputs(obs_path, nav_path)
    rel_poses = parse_rel_pose(rel_pose_path) if rel_pose_path else []
    config = graph_config(use_rel_pose_factors=bool(rel_poses), **overrides)
    odometry = estimate_trajectory(epochs, store, config, klobuchar, rel_poses)

    out_path = Path(out_path)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    export_trajectory(odometry.trajectory(), out_path, config.lever_arm)
    diagnostics = pd.DataFrame([{
        "week": d.t.week, "sow": d.t.sow, "satellites": d.satellites, "tdcp_factors": d.tdcp_factors,
        "iterations": d.iterations, "cost": d.cost, "termination": d.termination,
        "window_nodes": d.window_nodes,
    } for d in odometry.diagnostics])
    diagnostics_path = out_path.with_name(f"{out_path.stem}_diagnostics.csv")
    write_table(diagnostics, diagnostics_path)
    return {"trajectory": out_path, "diagnostics": diagnostics_path, "epochs": len(odometry.history)}


def baseline_files(method, obs_path, nav_path, out_path, rel_pose_path=None, **overrides):
    """Run a comparison method and export receiver-antenna positions."""
    if method not in BASELINE_METHODS:
        raise ConfigurationError("unknown baseline method", method=method, choices=list(BASELINE_METHODS))
    epochs, store, klobuchar = _load_inputs(obs_path, nav_path)
    config = graph_config(**overrides)
    atmosphere = AtmosphereModel(klobuchar=klobuchar, use_iono=True, use_tropo=True)

    if method == "pseudorange":
        run = pseudorange_odometry(epochs, store, atmosphere=atmosphere)
    elif method == "doppler":
        run = doppler_odometry(epochs, store, atmosphere=atmosphere)
    else:
        if not rel_pose_path:
            raise BaselineError("the relpose method needs a relative-pose CSV")
        start, _ = TdcpOdometry(store, config, klobuchar).initialize(epochs[:2])
        run = relative_pose_odometry(parse_rel_pose(rel_pose_path), start.pose, config.lever_arm)

    out_path = Path(out_path)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    export_trajectory(run.trajectory, out_path)
    if run.flagged:
        logger.warning(f"{method}: {len(run.flagged)} epoch(s) bridged or skipped.")
    return {"trajectory": out_path, "flagged": len(run.flagged)}


def evaluate_files(estimate_path, truth_path, out_path, sections=15, section_length=50.0, align_span=10.0):
    """Drift report (sections + curves CSV) and a one-row summary CSV for an exported trajectory."""
    estimate = read_trajectory(estimate_path, frame="receiver")
    truth = parse_ground_truth(truth_path)
    report = evaluate_trajectory(estimate, truth, sections, section_length, align_span,
                                 algorithm=Path(estimate_path).stem)
    sections_path, curves_path = write_report(report, out_path)
    summary = dict(report.summary(), final_error_m=final_error(estimate, truth, align_span))
    summary_path = Path(out_path).with_name(f"{Path(out_path).stem}_summary.csv")
    write_table(pd.DataFrame([summary]), summary_path)
    return {"sections": sections_path, "curves": curves_path, "summary": summary_path, "report": report}


# ==============================================================================
# EXPERIMENT SUITES
# ==============================================================================

async def _in_threads(func, jobs):
    """Run ``func(*job)`` for every job on worker threads; results keep the job order."""
    return await asyncio.gather(*(asyncio.to_thread(func, *job) for job in jobs))


def _config_text(source):
    if isinstance(source, dict):
        return yaml.safe_dump(source, sort_keys=True)
    if isinstance(source, Path) or (isinstance(source, str) and "\n" not in source
                                    and source.endswith((".yaml", ".yml", ".json"))):
        return Path(source).read_text()
    return str(source)


def _finite(value):
    if value is None:
        return None
    value = float(value)
    return value if math.isfinite(value) else None


def _default_output_dir(name):
    root = Path(settings.ODOMETRY.get('OUTPUT_DIR', Path(settings.MEDIA_ROOT) / 'experiments'))
    return root / f"{slugify(name) or 'suite'}-{timezone.now():%Y%m%dT%H%M%S%f}"


def execute_suite(suite, out_dir):
    """Simulate every (scenario, seed), run every algorithm on it, write the reports."""
    base_config = graph_config(**suite.graph_overrides)
    evaluation = EvaluationSettings(suite.sections, suite.section_length, suite.align_span)

    logger.info(f"Suite '{suite.name}': simulating {len(suite.scenarios) * len(suite.seeds)} case(s)...")
    simulations = asyncio.run(_in_threads(
        simulate_case, [(scenario, budget, seed) for scenario, budget in suite.scenarios for seed in suite.seeds]))

    jobs = [(sim, algorithm, base_config, evaluation) for sim in simulations for algorithm in suite.algorithms]
    logger.info(f"Suite '{suite.name}': running {len(jobs)} algorithm run(s)...")
    outcomes = asyncio.run(_in_threads(run_case_algorithm, jobs))

    cases, per_case = [], len(suite.algorithms)
    for i, sim in enumerate(simulations):
        cases.append(CaseResult(sim.scenario.name, sim.scenario.seed, sim.truth,
                                list(outcomes[i * per_case:(i + 1) * per_case])))
    paths = write_outputs(cases, out_dir, evaluation)
    return cases, paths


def run_experiment(source, out_dir=None, persist=True):
    """
    Load a suite (path, YAML text or mapping), execute it and, when
    ``persist`` is set, store one ExperimentSuite with its AlgorithmRuns.
    """
    suite = load_suite(source)
    out_dir = Path(out_dir) if out_dir else _default_output_dir(suite.name)
    started = time.perf_counter()
    cases, paths = execute_suite(suite, out_dir)
    wall_time = time.perf_counter() - started
    logger.info(f"Suite '{suite.name}' finished in {wall_time:.1f} s.")

    result = {"suite": suite.name, "output_dir": str(out_dir), "cases": len(cases),
              "runs": sum(len(c.outcomes) for c in cases), "paths": paths, "record": None}
    if not persist:
        return result

    error_curves = [p for p in paths["figures"] if p.name.endswith("_error_curves.svg")]
    try:
        with transaction.atomic():
            record = ExperimentSuite.objects.create(
                name=suite.name,
                config=_config_text(source),
                seeds=list(suite.seeds),
                algorithms=list(suite.algorithms),
                output_dir=str(out_dir),
                plot_path=str(error_curves[0]) if error_curves else "",
                wall_time_s=wall_time,
            )
            runs = []
            for case in cases:
                for outcome in case.outcomes:
                    row = outcome.summary_row()
                    runs.append(AlgorithmRun(
                        suite=record,
                        scenario=row["scenario"],
                        seed=row["seed"],
                        algorithm=row["algorithm"],
                        status=row["status"],
                        final_error_m=_finite(row["final_error_m"]),
                        mean_error_25_m=_finite(row["mean_error_25_m"]),
                        mean_error_50_m=_finite(row["mean_error_50_m"]),
                        drift_percent=_finite(row["drift_percent"]),
                        mean_r_squared=_finite(row["mean_r_squared"]),
                        sections=row["sections"],
                        pseudorange_rms_m=_finite(row["pseudorange_rms_m"]),
                        satellites_min=row["satellites_min"],
                        satellites_median=row["satellites_median"],
                        satellites_max=row["satellites_max"],
                        satellite_correlation=_finite(row["satellite_correlation"]),
                        flagged_epochs=row["flagged_epochs"],
                        wall_time_s=outcome.wall_time,
                    ))
            AlgorithmRun.objects.bulk_create(runs)
            logger.info(f"Stored suite #{record.pk} with {len(runs)} runs.")
    except DatabaseError as e:
        logger.error(f"Database error while storing suite '{suite.name}': {e}", exc_info=True)
        raise

    image = _generate_summary_image(record, cases, out_dir / "summary.png")
    if image:
        record.image_path = str(image)
        record.save(update_fields=["image_path"])
    result["record"] = record
    return result


# ==============================================================================
# SUMMARY CARD
# ==============================================================================

def _generate_summary_image(record, cases, path):
    """
    A PNG card with the suite's mean final error and drift per algorithm.
    Failures are logged and never abort the suite.
    """
    logger.debug("Starting summary image generation...")
    try:
        aggregate = aggregate_frame(summary_frame(cases))
        per_algorithm = aggregate.groupby("algorithm", sort=True).agg(
            final_error=("final_error_mean_m", "mean"), drift=("drift_percent", "mean"), runs=("runs", "sum"))

        img = Image.new('RGB', (900, 160 + 50 * max(len(per_algorithm), 1)), color='white')
        d = ImageDraw.Draw(img)
        try:
            title_font = ImageFont.load_default(size=32)
            text_font = ImageFont.load_default(size=20)
        except TypeError:
            title_font = text_font = ImageFont.load_default()

        d.text((40, 30), f"Experiment suite: {record.name}", fill=(0, 0, 0), font=title_font)
        d.text((40, 80), f"{len(cases)} case(s), seeds {', '.join(map(str, record.seeds))}",
               fill=(60, 60, 60), font=text_font)
        y_pos = 130
        for algorithm, row in per_algorithm.iterrows():
            drift = "n/a" if pd.isna(row["drift"]) else f"{row['drift']:.2f}%"
            final = "n/a" if pd.isna(row["final_error"]) else f"{row['final_error']:.3f} m"
            d.text((60, y_pos), f"{algorithm:<14} final error {final:>10}   drift {drift:>7}   runs {int(row['runs'])}",
                   fill=(20, 20, 20), font=text_font)
            y_pos += 50

        os.makedirs(os.path.dirname(path), exist_ok=True)
        img.save(path)
        logger.info(f"Summary image saved to {path}")
        return Path(path)
    except Exception as e:
        logger.error(f"Failed to generate summary image: {e}", exc_info=True)
        return None
