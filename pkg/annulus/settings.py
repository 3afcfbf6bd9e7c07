"""Django settings for the annulus project.

These settings configure the numerical tolerances, the defaults used by
the ``annulus`` management command and the logging setup.  Every value
that an operator might want to tune for a sweep can be overridden
through an environment variable, so the tool can be driven from shell
scripts without editing this file.
"""

from __future__ import annotations

import os
from pathlib import Path

# Build paths inside the project like this: BASE_DIR / 'subdir'.
BASE_DIR = Path(__file__).resolve().parent.parent


def _env_float(name: str, default: float) -> float:
    raw = os.getenv(name)
    return float(raw) if raw not in (None, '') else default


def _env_int(name: str, default: int) -> int:
    raw = os.getenv(name)
    return int(raw) if raw not in (None, '') else default


# Nothing here is secret: the project serves no requests and stores no sessions.
SECRET_KEY = os.getenv('ANNULUS_SECRET_KEY', 'annulus-local-toolkit')

DEBUG = os.getenv('ANNULUS_DEBUG', 'False').lower() in ('true', '1', 'yes')

ALLOWED_HOSTS: list[str] = []


# Application definition
INSTALLED_APPS = [
    'core',
]

# The toolkit is file-in / JSON-out; no database backend is configured.
DATABASES: dict = {}

USE_TZ = True

TIME_ZONE = 'UTC'

DEFAULT_AUTO_FIELD = 'django.db.models.BigAutoField'


# Numerical tolerances
# eq_tol: entrywise / operator-norm equality threshold
# psd_tol: eigenvalue negativity threshold for positivity tests
# kernel_tol: singular-value cutoff for kernels and invertibility
ANNULUS_TOLERANCES = {
    'eq_tol': _env_float('ANNULUS_TOL_EQ', 1e-10),
    'psd_tol': _env_float('ANNULUS_TOL_PSD', 1e-10),
    'kernel_tol': _env_float('ANNULUS_TOL_KER', 1e-8),
}

# Defaults for the ``annulus`` management command
ANNULUS_DEFAULTS = {
    'nodes': _env_int('ANNULUS_NODES', 8192),
    'max_power': _env_int('ANNULUS_MAX_POWER', 3),
    'snap_level': _env_int('ANNULUS_SNAP_LEVEL', 20),
    'cluster_gap': _env_float('ANNULUS_CLUSTER_GAP', 1e-8),
}


# Logging
#
# Reports go to stdout as JSON, so every log record is sent to stderr.
# Setting ANNULUS_LOG_FILE adds a rotating file handler next to it.
LOG_LEVEL = os.getenv('ANNULUS_LOG_LEVEL', 'INFO').upper()
LOG_FILE = os.getenv('ANNULUS_LOG_FILE', '')

LOGGING = {
    'version': 1,
    'disable_existing_loggers': False,
    'formatters': {
        'plain': {
            'format': '%(asctime)s | %(levelname)s | %(message)s',
        },
    },
    'handlers': {
        'console': {
            'class': 'logging.StreamHandler',
            'formatter': 'plain',
            'level': LOG_LEVEL,
        },
    },
    'loggers': {
        'annulus': {
            'handlers': ['console'],
            'level': LOG_LEVEL,
            'propagate': False,
        },
    },
}

if LOG_FILE:
    LOGGING['handlers']['file'] = {
        'class': 'logging.handlers.RotatingFileHandler',
        'filename': LOG_FILE,
        'maxBytes': 8_000_000,
        'backupCount': 4,
        'encoding': 'utf-8',
        'formatter': 'plain',
        'level': LOG_LEVEL,
    }
    LOGGING['loggers']['annulus']['handlers'].append('file')
