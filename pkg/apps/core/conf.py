import os

from django.conf import settings


def get_setting(name: str, default=None):
    return getattr(settings, name, default)


def contract_checks_enabled() -> bool:
    return bool(get_setting('ORTHOSPLAT_CONTRACT_CHECKS', settings.DEBUG))


def default_threads() -> int:
    return max(1, int(get_setting('ORTHOSPLAT_THREADS', os.cpu_count() or 1)))


def default_background() -> tuple[float, float, float]:
    values = tuple(float(v) for v in get_setting('ORTHOSPLAT_BACKGROUND', (1.0, 1.0, 1.0)))
    return values[0], values[1], values[2]
