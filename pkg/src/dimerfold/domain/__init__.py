"""
dimerfold Domain Layer.

Lattice geometry and Kasteleyn machinery:
- lattice: symmetric domains, Temperleyan / upper / strict-upper graphs, grids
- kasteleyn: phases, folded graphs, SL(2,C) connections, Kasteleyn matrices

Version: 0.1.0
"""

__all__ = ["kasteleyn", "lattice"]
