# odometry/filters.py
from django_filters import rest_framework as filters

from .models import AlgorithmRun


class AlgorithmRunFilter(filters.FilterSet):
    """
    Filters for the run list: ``?suite=3``, ``?algorithm=tdcp`` and
    ``?scenario=loop`` (the last two case-insensitive).
    """
    suite = filters.NumberFilter(field_name='suite_id')
    algorithm = filters.CharFilter(field_name='algorithm', lookup_expr='iexact')
    scenario = filters.CharFilter(field_name='scenario', lookup_expr='iexact')
    status = filters.CharFilter(field_name='status', lookup_expr='iexact')

    class Meta:
        model = AlgorithmRun
        fields = ['suite', 'algorithm', 'scenario', 'status']
