from django.apps import AppConfig


class FitAppConfig(AppConfig):
    name = 'apps.fit'
    label = 'fit'
