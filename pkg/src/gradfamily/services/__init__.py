"""
Numerical services: problems, stepsizes, solver, dynamics and benchmarks.
"""
