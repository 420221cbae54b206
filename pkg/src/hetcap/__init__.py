"""Two-capacity of small discs in periodic checkerboard media.

Closed-form limit laws, a finite-difference capacity solver, the periodic
cell problem, explicit capacitary profiles and an empirical De Giorgi
cut-off study.
"""

__version__ = "0.1.0"
