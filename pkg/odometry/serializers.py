# odometry/serializers.py
from rest_framework import serializers

from .models import AlgorithmRun, ExperimentSuite


class AlgorithmRunSerializer(serializers.ModelSerializer):
    suite_name = serializers.CharField(source='suite.name', read_only=True)

    class Meta:
        model = AlgorithmRun
        fields = '__all__'


class ExperimentSuiteSerializer(serializers.ModelSerializer):
    run_count = serializers.IntegerField(source='runs.count', read_only=True)

    class Meta:
        model = ExperimentSuite
        exclude = ['config']


class SuiteRequestSerializer(serializers.Serializer):
    """Body of POST /suites/run: a suite as YAML text or as a JSON object."""

    config = serializers.JSONField()
    persist = serializers.BooleanField(default=True)

    def validate_config(self, value):
        if isinstance(value, (dict, str)) and value:
            return value
        raise serializers.ValidationError("config must be a YAML string or a JSON object.")
