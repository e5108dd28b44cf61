from django.apps import AppConfig


class TdomConfig(AppConfig):
    name = 'apps.tdom'
    label = 'tdom'
