from django.apps import AppConfig


class OdeNetsConfig(AppConfig):
    default_auto_field = 'django.db.models.BigAutoField'
    name = 'odenets'
    verbose_name = 'Stateful ODE-Nets'
