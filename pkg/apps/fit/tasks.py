"""Background execution of fit jobs through django-rq."""
import logging
from pathlib import Path

from apps.core.conf import get_setting

try:
    import django_rq
except ImportError:  # optional dependency in local setup
    django_rq = None


logger = logging.getLogger(__name__)


def run_fit_job(ply_init: str, views_dir: str, out_dir: str, options: dict | None = None) -> str:
    """Queue entry point: fit a PLY against a views directory and write the
    optimized PLY, loss CSV and manifest into `out_dir`."""
    from django.core.management import call_command

    options = dict(options or {})
    call_command('fit', str(ply_init), str(views_dir), out_dir=str(out_dir), **options)
    return str(Path(out_dir))


def enqueue_fit_job(ply_init, views_dir, out_dir, options: dict | None = None):
    """Enqueue a fit on the configured RQ queue; without a reachable queue the
    job runs inline. Returns the RQ job, or the output directory when inline."""
    args = (str(ply_init), str(views_dir), str(out_dir), options or {})
    if django_rq is None:
        logger.warning('django_rq unavailable; running the fit job inline.')
        return run_fit_job(*args)
    queue_name = get_setting('ORTHOSPLAT_FIT_QUEUE', 'default')
    try:
        queue = django_rq.get_queue(queue_name)
        return queue.enqueue(run_fit_job, *args)
    except Exception:
        logger.exception('Could not enqueue the fit job on %r; running it inline.', queue_name)
        return run_fit_job(*args)
