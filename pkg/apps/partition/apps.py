from django.apps import AppConfig


class PartitionConfig(AppConfig):
    name = 'apps.partition'
    label = 'partition'
