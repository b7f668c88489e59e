"""
Core application infrastructure and utilities.
"""
