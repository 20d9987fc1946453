"""
dimerfold Capabilities.

Numerical and combinatorial engines built on the domain layer:
- linalg: Pfaffians, inverses, trace and determinant series
- enumeration: brute-force matchings, loops/arcs configurations, Kenyon check
- sampler: exact uniform dimer samplers
- arcs: enclosing-arc statistics and moment estimates
- zipper: zipper perturbation, trace series, finite-mesh identity
- continuum: Green kernels, c_n integrals, Bell-polynomial moments
- cylinder: traversing arcs on the folded cylinder

Usage:
    from dimerfold.capabilities.arcs import estimate_moments
    from dimerfold.capabilities.continuum import strip_cn, limit_moments

Version: 0.1.0
"""

__all__ = [
    "arcs",
    "continuum",
    "cylinder",
    "enumeration",
    "linalg",
    "sampler",
    "zipper",
]
