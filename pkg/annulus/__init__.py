"""Django project package for the annulus operator toolkit.

The project carries no web surface.  It exists so that configuration
(tolerances, CLI defaults, logging) lives in one settings module and the
command-line tool can be implemented as a Django management command in
the ``core`` app.
"""
