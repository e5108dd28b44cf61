from django.apps import AppConfig


class SceneioConfig(AppConfig):
    name = 'apps.sceneio'
    label = 'sceneio'
