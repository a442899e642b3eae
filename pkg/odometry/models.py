# odometry/models.py
from django.db import models


class ExperimentSuite(models.Model):
    """One execution of an experiment suite; the YAML it was run from is kept verbatim."""

    name = models.CharField(max_length=100)
    config = models.TextField()
    seeds = models.JSONField(default=list)
    algorithms = models.JSONField(default=list)
    output_dir = models.CharField(max_length=500)
    plot_path = models.CharField(max_length=500, blank=True)
    image_path = models.CharField(max_length=500, blank=True)
    wall_time_s = models.FloatField(default=0.0)
    created_at = models.DateTimeField(auto_now_add=True)

    class Meta:
        ordering = ['-created_at', '-id']

    def __str__(self):
        return f"{self.name} ({self.created_at:%Y-%m-%d %H:%M})" if self.created_at else self.name


class AlgorithmRun(models.Model):
    """Summary of one algorithm on one (scenario, seed) case. Metrics are null where undefined."""

    suite = models.ForeignKey(ExperimentSuite, related_name='runs', on_delete=models.CASCADE)
    scenario = models.CharField(max_length=100)
    seed = models.PositiveIntegerField()
    algorithm = models.CharField(max_length=30)
    status = models.CharField(max_length=50, default='ok')
    final_error_m = models.FloatField(null=True, blank=True)
    mean_error_25_m = models.FloatField(null=True, blank=True)
    mean_error_50_m = models.FloatField(null=True, blank=True)
    drift_percent = models.FloatField(null=True, blank=True)
    mean_r_squared = models.FloatField(null=True, blank=True)
    sections = models.PositiveIntegerField(default=0)
    pseudorange_rms_m = models.FloatField(null=True, blank=True)
    satellites_min = models.PositiveIntegerField(default=0)
    satellites_median = models.FloatField(default=0.0)
    satellites_max = models.PositiveIntegerField(default=0)
    satellite_correlation = models.FloatField(null=True, blank=True)
    flagged_epochs = models.PositiveIntegerField(default=0)
    wall_time_s = models.FloatField(default=0.0)

    class Meta:
        ordering = ['suite_id', 'scenario', 'seed', 'algorithm']
        constraints = [
            models.UniqueConstraint(fields=['suite', 'scenario', 'seed', 'algorithm'], name='unique_run_per_case'),
        ]

    def __str__(self):
        return f"{self.algorithm} on {self.scenario} (seed {self.seed})"
