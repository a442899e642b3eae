# odometry/management/commands/experiment.py
from odometry.services import run_experiment

from ._base import OdometryCommand


class Command(OdometryCommand):
    help = "Run an experiment suite: every algorithm on every (scenario, seed), with reports and plots."

    def add_arguments(self, parser):
        parser.add_argument("--suite", required=True, help="Suite YAML file.")
        parser.add_argument("--out-dir", required=True)
        parser.add_argument("--no-persist", action="store_true", help="Do not store the summaries in the database.")

    def run(self, **options):
        result = run_experiment(options["suite"], out_dir=options["out_dir"], persist=not options["no_persist"])
        return (f"Suite '{result['suite']}': {result['runs']} runs over {result['cases']} case(s) "
                f"-> {result['output_dir']}")
