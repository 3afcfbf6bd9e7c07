"""Command subpackage; see ``annulus.py`` for the toolkit's command-line surface."""
