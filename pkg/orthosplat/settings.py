import os
from pathlib import Path

# Build paths inside the project like this: BASE_DIR / 'subdir'.
BASE_DIR = Path(__file__).resolve().parent.parent


def load_env_file(path: Path) -> None:
    if not path.exists():
        return

    for raw_line in path.read_text(encoding='utf-8').splitlines():
        line = raw_line.strip()
        if not line or line.startswith('#') or '=' not in line:
            continue
        key, value = line.split('=', 1)
        key = key.strip()
        value = value.strip().strip("'\"")
        os.environ.setdefault(key, value)


def get_bool(name: str, default: bool = False) -> bool:
    return os.getenv(name, str(default)).strip().lower() in {
        '1',
        'true',
        't',
        'yes',
        'y',
        'on',
    }


def get_float(name: str, default: float) -> float:
    raw = (os.getenv(name) or '').strip()
    return float(raw) if raw else default


def get_int(name: str, default: int) -> int:
    raw = (os.getenv(name) or '').strip()
    return int(raw) if raw else default


def _get_csv_floats(name: str, default: tuple[float, ...]) -> tuple[float, ...]:
    raw = (os.getenv(name) or '').strip()
    if not raw:
        return default
    return tuple(float(item.strip()) for item in raw.split(',') if item.strip())


load_env_file(BASE_DIR / '.env')

# Only used by Django internals; the pipeline never signs anything.
SECRET_KEY = os.getenv('DJANGO_SECRET_KEY', 'orthosplat-local')

DEBUG = get_bool('DJANGO_DEBUG', True)

INSTALLED_APPS = [
    'apps.core.apps.CoreConfig',
    'apps.projection.apps.ProjectionConfig',
    'apps.rasterizer.apps.RasterizerConfig',
    'apps.partition.apps.PartitionConfig',
    'apps.tdom.apps.TdomConfig',
    'apps.evaluation.apps.EvaluationConfig',
    'apps.sceneio.apps.SceneioConfig',
    'apps.fit.apps.FitAppConfig',
    'apps.pipeline.apps.PipelineConfig',
    'django_rq',
]

REDIS_URL = os.getenv('REDIS_URL', '').strip()
RQ_QUEUES = {
    'default': {
        'URL': REDIS_URL or 'redis://localhost:6379/0',
        'DEFAULT_TIMEOUT': 6 * 3600,
    }
}

TIME_ZONE = os.getenv('DJANGO_TIME_ZONE', 'UTC')
USE_TZ = True

DEFAULT_AUTO_FIELD = 'django.db.models.BigAutoField'

# ---------------------------------------------------------------------------
# Pipeline defaults
# ---------------------------------------------------------------------------
# Every value below is printed in `--help` of the commands that use it and is
# copied into the run manifest.
ORTHOSPLAT_THREADS = get_int('ORTHOSPLAT_THREADS', os.cpu_count() or 1)
ORTHOSPLAT_TILES_IN_FLIGHT = get_int('ORTHOSPLAT_TILES_IN_FLIGHT', 2)
ORTHOSPLAT_BACKGROUND = _get_csv_floats('ORTHOSPLAT_BACKGROUND', (1.0, 1.0, 1.0))
ORTHOSPLAT_Z_MARGIN_RATIO = get_float('ORTHOSPLAT_Z_MARGIN_RATIO', 0.05)

ORTHOSPLAT_EXPANSION_RATIO = get_float('ORTHOSPLAT_EXPANSION_RATIO', 0.2)
ORTHOSPLAT_VISIBILITY_THRESHOLD = get_float('ORTHOSPLAT_VISIBILITY_THRESHOLD', 0.25)
ORTHOSPLAT_CAMERA_Z_NEAR = get_float('ORTHOSPLAT_CAMERA_Z_NEAR', 0.01)
ORTHOSPLAT_CAMERA_Z_FAR = get_float('ORTHOSPLAT_CAMERA_Z_FAR', 10000.0)

ORTHOSPLAT_CANNY_SIGMA = get_float('ORTHOSPLAT_CANNY_SIGMA', 1.4)
ORTHOSPLAT_CANNY_LOW = get_float('ORTHOSPLAT_CANNY_LOW', 0.1)
ORTHOSPLAT_CANNY_HIGH = get_float('ORTHOSPLAT_CANNY_HIGH', 0.3)

ORTHOSPLAT_FIT_ITERATIONS = get_int('ORTHOSPLAT_FIT_ITERATIONS', 200)
ORTHOSPLAT_FIT_QUEUE = os.getenv('ORTHOSPLAT_FIT_QUEUE', 'default').strip() or 'default'

# Sortedness of fragment lists and similar preconditions are asserted only
# when this is on.
ORTHOSPLAT_CONTRACT_CHECKS = get_bool('ORTHOSPLAT_CONTRACT_CHECKS', DEBUG)

# Enables the wall-clock render budgets in apps/tdom/tests/test_performance.py.
ORTHOSPLAT_TIMING_TESTS = get_bool('ORTHOSPLAT_TIMING_TESTS', False)

ORTHOSPLAT_LOG_LEVEL = os.getenv('ORTHOSPLAT_LOG_LEVEL', 'INFO').strip().upper()

LOGGING = {
    'version': 1,
    'disable_existing_loggers': False,
    'formatters': {
        'plain': {
            'format': '[{levelname}] {name}: {message}',
            'style': '{',
        },
    },
    'handlers': {
        'stderr': {
            'class': 'logging.StreamHandler',
            'stream': 'ext://sys.stderr',
            'formatter': 'plain',
        },
    },
    'loggers': {
        'apps': {
            'handlers': ['stderr'],
            'level': ORTHOSPLAT_LOG_LEVEL,
            'propagate': False,
        },
        'orthosplat': {
            'handlers': ['stderr'],
            'level': ORTHOSPLAT_LOG_LEVEL,
            'propagate': False,
        },
    },
}
