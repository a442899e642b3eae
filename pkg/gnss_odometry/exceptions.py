# gnss_odometry/exceptions.py
import logging

from rest_framework import status
from rest_framework.response import Response
from rest_framework.views import exception_handler

from odometry.gnss.exceptions import OdometryError

logger = logging.getLogger('gnss_odometry')


def custom_exception_handler(exc, context):
    """
    Render every API error as {"error": "..."}.

    Engine failures (bad suite configuration, unusable observations, solver
    breakdown) arrive as OdometryError and are answered with 422 plus the
    error's code and details.
    """
    if isinstance(exc, OdometryError):
        logger.warning(f"Request failed with {exc.code}: {exc.message}")
        return Response(
            {'error': exc.message, 'code': exc.code, 'details': exc.details},
            status=status.HTTP_422_UNPROCESSABLE_ENTITY,
        )

    response = exception_handler(exc, context)

    if response is not None:
        if response.status_code == 404:
            response.data = {'error': 'Run not found'}
        elif response.status_code == 400:
            # Serializer errors come back as a field -> messages mapping
            response.data = {'error': 'Validation failed', 'details': response.data}
        elif response.status_code >= 500:
            response.data = {'error': 'Internal server error'}

    return response
