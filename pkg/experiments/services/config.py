"""
Access to the UPLOADLAB settings block.
"""

from pathlib import Path

from django.conf import settings
from django.core.exceptions import ImproperlyConfigured


def _as_int(cfg, key, default, minimum=1):
    raw = cfg.get(key, default)
    try:
        value = int(str(raw).strip())
    except (TypeError, ValueError):
        raise ImproperlyConfigured(f'UPLOADLAB[{key!r}] must be an integer, got {raw!r}')
    if value < minimum:
        raise ImproperlyConfigured(f'UPLOADLAB[{key!r}] must be >= {minimum}, got {value}')
    return value


def get_config():
    cfg = getattr(settings, 'UPLOADLAB', {}) or {}

    output_dir = str(cfg.get('OUTPUT_DIR', '')).strip()
    if not output_dir:
        raise ImproperlyConfigured('Missing UPLOADLAB configuration (OUTPUT_DIR)')

    return {
        'OUTPUT_DIR': Path(output_dir),
        'DEFAULT_THREADS': _as_int(cfg, 'DEFAULT_THREADS', 1),
        'CHUNK_SIZE': _as_int(cfg, 'CHUNK_SIZE', 2000),
        'MAX_DENSE_QUBITS': _as_int(cfg, 'MAX_DENSE_QUBITS', 12),
        'MAX_REPLICA_QUBITS': _as_int(cfg, 'MAX_REPLICA_QUBITS', 4),
        'SHADOW_EXACT_MAX_SITES': _as_int(cfg, 'SHADOW_EXACT_MAX_SITES', 14),
    }
