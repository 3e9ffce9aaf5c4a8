from django.apps import AppConfig


class PauliConfig(AppConfig):
    name = 'pauli'
