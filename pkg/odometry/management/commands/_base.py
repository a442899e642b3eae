# odometry/management/commands/_base.py
import logging

from django.core.management.base import BaseCommand, CommandError

from odometry.gnss.exceptions import OdometryError

logger = logging.getLogger('odometry')


class OdometryCommand(BaseCommand):
    """
    Commands implement ``run(**options)``; engine errors leave as
    ``CommandError("<code>: <message>")`` so the process exits nonzero.
    """

    def handle(self, *args, **options):
        try:
            message = self.run(**options)
        except CommandError:
            raise
        except OdometryError as exc:
            details = ", ".join(f"{k}={v}" for k, v in sorted(exc.details.items()))
            raise CommandError(f"{exc.code}: {exc.message}" + (f" ({details})" if details else "")) from exc
        except Exception as exc:
            logger.error(f"Unexpected failure in {self.__module__.rsplit('.', 1)[-1]}: {exc}", exc_info=True)
            raise CommandError(f"internal_error: {exc}") from exc
        if message:
            self.stdout.write(self.style.SUCCESS(message))

    def run(self, **options):
        raise NotImplementedError


def add_estimator_flags(parser):
    parser.add_argument("--topology", choices=["consecutive", "dense"], default=None,
                        help="TDCP pairing: previous node only, or every node in the window.")
    parser.add_argument("--window", type=float, default=None, help="Sliding-window length in seconds.")
    parser.add_argument("--no-iono", action="store_true", help="Skip the Klobuchar correction.")
    parser.add_argument("--iono", action="store_true", help="Apply the Klobuchar correction.")
    parser.add_argument("--lever-arm", type=float, nargs=3, default=None, metavar=("X", "Y", "Z"),
                        help="Antenna position in the vehicle frame, metres.")


def estimator_overrides(options):
    use_iono = None
    if options.get("iono"):
        use_iono = True
    if options.get("no_iono"):
        use_iono = False
    return dict(
        tdcp_topology=options.get("topology"),
        window_length=options.get("window"),
        use_iono=use_iono,
        lever_arm=tuple(options["lever_arm"]) if options.get("lever_arm") else None,
    )
