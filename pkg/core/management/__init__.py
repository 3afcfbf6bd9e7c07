"""Management package exposing the ``annulus`` command."""
