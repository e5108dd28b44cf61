from django.apps import AppConfig


class RasterizerConfig(AppConfig):
    name = 'apps.rasterizer'
    label = 'rasterizer'
