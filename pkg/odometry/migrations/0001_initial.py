# Generated by Django 5.2.7 on 2026-10-17 09:12

import django.db.models.deletion
from django.db import migrations, models


class Migration(migrations.Migration):

    initial = True

    dependencies = [
    ]

    operations = [
        migrations.CreateModel(
            name='ExperimentSuite',
            fields=[
                ('id', models.BigAutoField(auto_created=True, primary_key=True, serialize=False, verbose_name='ID')),
                ('name', models.CharField(max_length=100)),
                ('config', models.TextField()),
                ('seeds', models.JSONField(default=list)),
                ('algorithms', models.JSONField(default=list)),
                ('output_dir', models.CharField(max_length=500)),
                ('plot_path', models.CharField(blank=True, max_length=500)),
                ('image_path', models.CharField(blank=True, max_length=500)),
                ('wall_time_s', models.FloatField(default=0.0)),
                ('created_at', models.DateTimeField(auto_now_add=True)),
            ],
            options={
                'ordering': ['-created_at', '-id'],
            },
        ),
        migrations.CreateModel(
            name='AlgorithmRun',
            fields=[
                ('id', models.BigAutoField(auto_created=True, primary_key=True, serialize=False, verbose_name='ID')),
                ('scenario', models.CharField(max_length=100)),
                ('seed', models.PositiveIntegerField()),
                ('algorithm', models.CharField(max_length=30)),
                ('status', models.CharField(default='ok', max_length=50)),
                ('final_error_m', models.FloatField(blank=True, null=True)),
                ('mean_error_25_m', models.FloatField(blank=True, null=True)),
                ('mean_error_50_m', models.FloatField(blank=True, null=True)),
                ('drift_percent', models.FloatField(blank=True, null=True)),
                ('mean_r_squared', models.FloatField(blank=True, null=True)),
                ('sections', models.PositiveIntegerField(default=0)),
                ('pseudorange_rms_m', models.FloatField(blank=True, null=True)),
                ('satellites_min', models.PositiveIntegerField(default=0)),
                ('satellites_median', models.FloatField(default=0.0)),
                ('satellites_max', models.PositiveIntegerField(default=0)),
                ('satellite_correlation', models.FloatField(blank=True, null=True)),
                ('flagged_epochs', models.PositiveIntegerField(default=0)),
                ('wall_time_s', models.FloatField(default=0.0)),
                ('suite', models.ForeignKey(on_delete=django.db.models.deletion.CASCADE, related_name='runs', to='odometry.experimentsuite')),
            ],
            options={
                'ordering': ['suite_id', 'scenario', 'seed', 'algorithm'],
                'constraints': [models.UniqueConstraint(fields=('suite', 'scenario', 'seed', 'algorithm'), name='unique_run_per_case')],
            },
        ),
    ]
