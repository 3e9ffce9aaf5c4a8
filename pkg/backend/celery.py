"""
Celery application for queued sweep points.

Without REDIS_URL the settings turn on CELERY_TASK_ALWAYS_EAGER, so
`inject sweep --queue` runs every point inline.
"""
import os

from celery import Celery

os.environ.setdefault('DJANGO_SETTINGS_MODULE', 'backend.settings')

app = Celery('uploadlab')
app.config_from_object('django.conf:settings', namespace='CELERY')
app.autodiscover_tasks()
