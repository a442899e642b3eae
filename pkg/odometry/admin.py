from django.contrib import admin

from .models import AlgorithmRun, ExperimentSuite


class AlgorithmRunInline(admin.TabularInline):
    model = AlgorithmRun
    extra = 0
    fields = ('scenario', 'seed', 'algorithm', 'status', 'final_error_m', 'drift_percent')
    readonly_fields = fields


@admin.register(ExperimentSuite)
class ExperimentSuiteAdmin(admin.ModelAdmin):
    list_display = ('name', 'created_at', 'wall_time_s')
    search_fields = ('name',)
    inlines = [AlgorithmRunInline]


@admin.register(AlgorithmRun)
class AlgorithmRunAdmin(admin.ModelAdmin):
    list_display = ('suite', 'scenario', 'seed', 'algorithm', 'status', 'final_error_m', 'drift_percent')
    list_filter = ('algorithm', 'status')
