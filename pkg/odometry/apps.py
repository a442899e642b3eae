from django.apps import AppConfig


class OdometryConfig(AppConfig):
    default_auto_field = 'django.db.models.BigAutoField'
    name = 'odometry'
    verbose_name = 'GNSS odometry'
