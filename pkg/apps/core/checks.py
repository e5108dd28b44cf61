from django.conf import settings
from django.core.checks import Error, register


@register('orthosplat')
def validate_pipeline_settings(app_configs=None, **kwargs):
    errors = []

    def fail(message: str, check_id: str):
        errors.append(Error(message, id=check_id))

    if getattr(settings, 'ORTHOSPLAT_THREADS', 1) < 1:
        fail('ORTHOSPLAT_THREADS must be >= 1.', 'orthosplat.E001')
    if getattr(settings, 'ORTHOSPLAT_TILES_IN_FLIGHT', 1) < 1:
        fail('ORTHOSPLAT_TILES_IN_FLIGHT must be >= 1.', 'orthosplat.E002')

    background = tuple(getattr(settings, 'ORTHOSPLAT_BACKGROUND', (1.0, 1.0, 1.0)))
    if len(background) != 3 or any(not 0.0 <= value <= 1.0 for value in background):
        fail('ORTHOSPLAT_BACKGROUND must be three values in [0, 1].', 'orthosplat.E003')

    if getattr(settings, 'ORTHOSPLAT_EXPANSION_RATIO', 0.0) < 0:
        fail('ORTHOSPLAT_EXPANSION_RATIO must be >= 0.', 'orthosplat.E004')
    threshold = getattr(settings, 'ORTHOSPLAT_VISIBILITY_THRESHOLD', 0.25)
    if not 0.0 < threshold <= 1.0:
        fail('ORTHOSPLAT_VISIBILITY_THRESHOLD must lie in (0, 1].', 'orthosplat.E005')

    z_near = getattr(settings, 'ORTHOSPLAT_CAMERA_Z_NEAR', 0.01)
    z_far = getattr(settings, 'ORTHOSPLAT_CAMERA_Z_FAR', 10000.0)
    if not 0.0 < z_near < z_far:
        fail('Camera clip planes must satisfy 0 < z_near < z_far.', 'orthosplat.E006')

    if getattr(settings, 'ORTHOSPLAT_Z_MARGIN_RATIO', 0.05) < 0:
        fail('ORTHOSPLAT_Z_MARGIN_RATIO must be >= 0.', 'orthosplat.E007')

    low = getattr(settings, 'ORTHOSPLAT_CANNY_LOW', 0.1)
    high = getattr(settings, 'ORTHOSPLAT_CANNY_HIGH', 0.3)
    sigma = getattr(settings, 'ORTHOSPLAT_CANNY_SIGMA', 1.4)
    if not 0.0 <= low < high or sigma <= 0:
        fail('Canny defaults must satisfy 0 <= low < high and sigma > 0.', 'orthosplat.E008')

    if getattr(settings, 'ORTHOSPLAT_FIT_ITERATIONS', 1) < 1:
        fail('ORTHOSPLAT_FIT_ITERATIONS must be >= 1.', 'orthosplat.E009')

    return errors
