"""Console entry point for the ``annulus`` command.

``annulus check tuple.json`` is shorthand for
``python manage.py annulus check tuple.json``: the settings module is
set and the arguments are handed to the management command of the same
name in the ``core`` app.
"""

from __future__ import annotations

import os
import sys


def main() -> None:
    """Run the ``annulus`` management command with the process arguments."""
    os.environ.setdefault('DJANGO_SETTINGS_MODULE', 'annulus.settings')
    try:
        from django.core.management import execute_from_command_line  # type: ignore
    except ImportError as exc:  # pragma: no cover
        raise ImportError(
            "Couldn't import Django. Are you sure it's installed and "
            "available on your PYTHONPATH environment variable? Did you "
            "forget to activate a virtual environment?"
        ) from exc
    execute_from_command_line([sys.argv[0], 'annulus', *sys.argv[1:]])


if __name__ == '__main__':
    main()
