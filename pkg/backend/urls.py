"""
URL configuration for the uploadlab project.

Only the Django admin is routed; experiments are driven from management
commands and the celery worker.
"""
from django.contrib import admin
from django.urls import path

urlpatterns = [
    path('django-admin/', admin.site.urls),
]
