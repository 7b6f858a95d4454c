from django.apps import AppConfig


class WbicConfig(AppConfig):
    name = 'wbic'
    verbose_name = "Whole-body impedance coordination"

    def ready(self):
        from . import signals  # noqa
