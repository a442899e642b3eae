# odometry/management/commands/baseline.py
from odometry.services import BASELINE_METHODS, baseline_files

from ._base import OdometryCommand


class Command(OdometryCommand):
    help = "Run a comparison method: pseudorange fixes, integrated Doppler or relative-pose dead reckoning."

    def add_arguments(self, parser):
        parser.add_argument("--method", required=True, choices=BASELINE_METHODS)
        parser.add_argument("--obs", required=True)
        parser.add_argument("--nav", required=True)
        parser.add_argument("--rel-pose", default=None, help="Required for --method relpose.")
        parser.add_argument("--lever-arm", type=float, nargs=3, default=None, metavar=("X", "Y", "Z"))
        parser.add_argument("--out", required=True)

    def run(self, **options):
        lever = tuple(options["lever_arm"]) if options["lever_arm"] else None
        result = baseline_files(options["method"], options["obs"], options["nav"], options["out"],
                                rel_pose_path=options["rel_pose"], lever_arm=lever)
        return f"{options['method']} trajectory -> {result['trajectory']} ({result['flagged']} flagged epochs)"
