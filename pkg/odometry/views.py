# odometry/views.py
import logging
from pathlib import Path

from django.db.models import Max
from django.http import FileResponse, Http404
from django_filters.rest_framework import DjangoFilterBackend
from rest_framework import generics, status
from rest_framework.decorators import api_view
from rest_framework.filters import OrderingFilter
from rest_framework.response import Response

from .filters import AlgorithmRunFilter
from .gnss.exceptions import OdometryError
from .models import AlgorithmRun, ExperimentSuite
from .serializers import AlgorithmRunSerializer, ExperimentSuiteSerializer, SuiteRequestSerializer
from .services import run_experiment

logger = logging.getLogger('odometry')


class CustomOrderingFilter(OrderingFilter):
    """Ordering through ``?sort=`` instead of DRF's default ``?ordering=``."""
    ordering_param = "sort"


# --- Runs ---

class AlgorithmRunListView(generics.ListAPIView):
    """
    Handles GET /runs.
    Filter with ?suite=, ?algorithm=, ?scenario=, ?status=; sort with e.g.
    ?sort=final_error_m or ?sort=-drift_percent.
    """
    queryset = AlgorithmRun.objects.select_related('suite')
    serializer_class = AlgorithmRunSerializer
    filterset_class = AlgorithmRunFilter
    filter_backends = [DjangoFilterBackend, CustomOrderingFilter]
    ordering_fields = ['final_error_m', 'mean_error_25_m', 'mean_error_50_m', 'drift_percent',
                       'mean_r_squared', 'pseudorange_rms_m', 'wall_time_s', 'seed', 'algorithm']


class AlgorithmRunDetailView(generics.RetrieveAPIView):
    """Handles GET /runs/:id."""
    queryset = AlgorithmRun.objects.select_related('suite')
    serializer_class = AlgorithmRunSerializer

    def get_object(self):
        try:
            obj = self.get_queryset().get(pk=self.kwargs['pk'])
        except AlgorithmRun.DoesNotExist:
            logger.warning(f"Run {self.kwargs.get('pk')} not found.")
            # Rendered as {"error": "Run not found"} by the custom exception handler.
            raise Http404
        self.check_object_permissions(self.request, obj)
        return obj


# --- Suites ---

class ExperimentSuiteListView(generics.ListAPIView):
    """Handles GET /suites, newest first."""
    queryset = ExperimentSuite.objects.all()
    serializer_class = ExperimentSuiteSerializer


@api_view(['POST'])
def run_suite_view(request):
    """
    Handles POST /suites/run.
    Body: {"config": <suite YAML text or JSON object>, "persist": true}. The
    suite runs synchronously; engine errors come back as 422 through the
    exception handler.
    """
    logger.info(f"Received request to {request.path} from {request.META.get('REMOTE_ADDR')}")
    serializer = SuiteRequestSerializer(data=request.data)
    serializer.is_valid(raise_exception=True)
    try:
        result = run_experiment(serializer.validated_data['config'],
                                persist=serializer.validated_data['persist'])
    except OdometryError:
        raise
    except Exception as e:
        logger.critical(f"An unexpected error occurred while running a suite: {e}", exc_info=True)
        return Response({"error": "An internal server error occurred", "details": str(e)},
                        status=status.HTTP_500_INTERNAL_SERVER_ERROR)

    record = result["record"]
    body = {
        "suite": result["suite"],
        "suite_id": record.pk if record else None,
        "cases": result["cases"],
        "runs": result["runs"],
        "output_dir": result["output_dir"],
    }
    if record:
        body["results"] = AlgorithmRunSerializer(record.runs.all(), many=True).data
    return Response(body, status=status.HTTP_201_CREATED if record else status.HTTP_200_OK)


def _suite_file(pk, attribute, content_type, label):
    try:
        suite = ExperimentSuite.objects.get(pk=pk)
    except ExperimentSuite.DoesNotExist:
        return Response({"error": "Suite not found"}, status=status.HTTP_404_NOT_FOUND)
    path = getattr(suite, attribute)
    if not path or not Path(path).is_file():
        logger.warning(f"{label} for suite {pk} not found at '{path}'")
        return Response({"error": f"{label} not found for this suite."}, status=status.HTTP_404_NOT_FOUND)
    return FileResponse(open(path, 'rb'), content_type=content_type)


@api_view(['GET'])
def suite_plot_view(request, pk):
    """Handles GET /suites/:id/plot (SVG error curves of the first scenario)."""
    return _suite_file(pk, 'plot_path', 'image/svg+xml', 'Error-curve plot')


@api_view(['GET'])
def suite_image_view(request, pk):
    """Handles GET /suites/:id/image (PNG summary card)."""
    return _suite_file(pk, 'image_path', 'image/png', 'Summary image')


# --- Status ---

@api_view(['GET'])
def status_view(request):
    """
    Handles GET /status.
    Returns the number of stored suites and runs and when the last suite finished.
    """
    logger.debug(f"Status endpoint requested by {request.META.get('REMOTE_ADDR')}")
    latest = ExperimentSuite.objects.aggregate(last=Max('created_at'))['last']
    return Response({
        "total_suites": ExperimentSuite.objects.count(),
        "total_runs": AlgorithmRun.objects.count(),
        "last_suite_at": latest,
    })
