# odometry/urls.py
from django.urls import path
from .views import (
    AlgorithmRunDetailView,
    AlgorithmRunListView,
    ExperimentSuiteListView,
    run_suite_view,
    status_view,
    suite_image_view,
    suite_plot_view,
)

urlpatterns = [
    path('runs', AlgorithmRunListView.as_view(), name='run-list'),
    path('runs/<int:pk>', AlgorithmRunDetailView.as_view(), name='run-detail'),

    # 'suites/run' must come before the '<int:pk>' routes
    path('suites/run', run_suite_view, name='suite-run'),
    path('suites', ExperimentSuiteListView.as_view(), name='suite-list'),
    path('suites/<int:pk>/plot', suite_plot_view, name='suite-plot'),
    path('suites/<int:pk>/image', suite_image_view, name='suite-image'),

    path('status', status_view, name='status'),
]
