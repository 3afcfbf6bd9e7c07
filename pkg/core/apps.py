"""Application configuration for the core app.

On startup ``CoreConfig.ready`` builds the tolerance object from
``settings.ANNULUS_TOLERANCES`` and checks the CLI defaults, so a bad
environment override (``ANNULUS_TOL_EQ=2`` and the like) fails before
any command runs instead of halfway through a computation.
"""

from __future__ import annotations

import logging

from django.apps import AppConfig
from django.core.exceptions import ImproperlyConfigured

log = logging.getLogger('annulus.config')


class CoreConfig(AppConfig):
    """Validates numerical settings on startup."""

    default_auto_field = 'django.db.models.BigAutoField'
    name = 'core'

    def ready(self) -> None:
        from django.conf import settings

        from .matrix_core import ToleranceConfig

        try:
            tol = ToleranceConfig.from_settings()
        except (TypeError, ValueError) as exc:
            raise ImproperlyConfigured(f"invalid ANNULUS_TOLERANCES: {exc}") from exc

        defaults = getattr(settings, 'ANNULUS_DEFAULTS', {}) or {}
        nodes = int(defaults.get('nodes', 8192))
        if nodes < 16 or nodes & (nodes - 1):
            raise ImproperlyConfigured(f"ANNULUS_DEFAULTS['nodes'] must be a power of two >= 16, got {nodes}")
        if not (0 <= int(defaults.get('max_power', 3)) <= 12):
            raise ImproperlyConfigured('ANNULUS_DEFAULTS[\'max_power\'] must lie in [0, 12]')
        if int(defaults.get('snap_level', 20)) < 1:
            raise ImproperlyConfigured('ANNULUS_DEFAULTS[\'snap_level\'] must be a positive integer')
        if not (0.0 < float(defaults.get('cluster_gap', 1e-8)) < 1.0):
            raise ImproperlyConfigured('ANNULUS_DEFAULTS[\'cluster_gap\'] must lie in (0, 1)')
        log.debug(f"[config] tolerances {tol.as_dict()}")
