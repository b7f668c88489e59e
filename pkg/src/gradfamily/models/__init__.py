"""
Input models for problems, schedules, solver settings and benchmark grids.
"""
