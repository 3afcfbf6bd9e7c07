"""Core application of the annulus toolkit.

This package holds the numerical modules (dense linear algebra helpers,
class certificates, UD factorization, conformal symbols, quadrature
dilation, canonical decomposition and instance generators), the tuple
file format and the ``annulus`` management command.  The modules only
need numpy, scipy and pandas at import time, so they can also be used
without a configured Django project; tolerances then fall back to the
built-in defaults.

``CoreConfig`` validates the configured tolerances when Django starts.
"""
