# odometry/management/commands/simulate.py
from odometry.services import simulate_to_files

from ._base import OdometryCommand


class Command(OdometryCommand):
    help = "Simulate a scenario and write RINEX obs/nav, ground truth and relative poses."

    def add_arguments(self, parser):
        parser.add_argument("--config", required=True, help="Scenario YAML file.")
        parser.add_argument("--out-dir", required=True)
        parser.add_argument("--seed", type=int, default=None, help="Override the scenario seed.")

    def run(self, **options):
        paths = simulate_to_files(options["config"], options["out_dir"], seed=options["seed"])
        return "Wrote " + ", ".join(str(p) for p in paths.values())
