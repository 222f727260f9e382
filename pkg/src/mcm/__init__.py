"""Exact verification toolkit for moving-coefficient complete intersections.

Modules: ``polyring`` (sparse polynomials and forms), ``schedule`` (degree
schedules and bound arithmetic), ``hypersurfaces`` (systems and their
rewritings), ``symforms`` (form matrices, symmetric forms and identity
checks), ``codim`` (point-counting codimension oracle), ``baselocus``
(rank characterization of the base locus) and ``cli``.
"""

__version__ = "0.1.0"
