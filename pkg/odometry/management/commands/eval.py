# odometry/management/commands/eval.py
from odometry.services import evaluate_files

from ._base import OdometryCommand


class Command(OdometryCommand):
    help = "Section-wise drift of an exported trajectory against ground truth."

    def add_arguments(self, parser):
        parser.add_argument("--estimate", required=True, help="Trajectory CSV from estimate or baseline.")
        parser.add_argument("--truth", required=True, help="Ground-truth CSV.")
        parser.add_argument("--sections", type=int, default=15)
        parser.add_argument("--length", type=float, default=50.0, help="Section length, metres.")
        parser.add_argument("--align", type=float, default=10.0, help="Alignment span, metres.")
        parser.add_argument("--out", required=True, help="Section report CSV.")

    def run(self, **options):
        result = evaluate_files(options["estimate"], options["truth"], options["out"],
                                sections=options["sections"], section_length=options["length"],
                                align_span=options["align"])
        report = result["report"]
        return (f"{len(report.sections)} sections: mean error at {report.section_length:g} m "
                f"{report.mean_error_50:.3f} m ({report.drift_percent:.2f}%) -> {result['sections']}")
