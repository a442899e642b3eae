# odometry/management/commands/estimate.py
from odometry.services import estimate_files

from ._base import OdometryCommand, add_estimator_flags, estimator_overrides


class Command(OdometryCommand):
    help = "Estimate a trajectory from RINEX observations with TDCP odometry."

    def add_arguments(self, parser):
        parser.add_argument("--obs", required=True, help="RINEX 2.11/3.x observation file.")
        parser.add_argument("--nav", required=True, help="RINEX GPS navigation file.")
        parser.add_argument("--rel-pose", default=None, help="Relative-pose CSV; enables rel-pose factors.")
        parser.add_argument("--out", required=True, help="Trajectory CSV to write.")
        add_estimator_flags(parser)

    def run(self, **options):
        result = estimate_files(options["obs"], options["nav"], options["out"],
                                rel_pose_path=options["rel_pose"], **estimator_overrides(options))
        return f"Estimated {result['epochs']} epochs -> {result['trajectory']}"
