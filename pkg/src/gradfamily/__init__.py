"""
gradfamily: gradient methods with stepsize g'Psi(A)g / g'Psi(A)Ag for convex quadratics.
"""
__version__ = "0.1.0"
