"""
dimerfold - folded and shifted double-dimer models with arcs.

This package provides:
- Lattice domains and (piecewise) Temperleyan graphs on the doubled square lattice
- Kasteleyn phases, folded graphs, SL(2,C) connections and Pfaffian machinery
- Brute-force oracles (matchings, loops/arcs configurations, Kenyon's formula)
- Exact uniform samplers (Wilson-Temperley and determinantal)
- Arc statistics, zipper trace series and continuum Bell-polynomial moments
- The cylinder traversing-arc generating function
- CLI: reproducible experiments with manifests

Version: 0.1.0
"""

__version__ = "0.1.0"

__all__ = ["__version__"]
