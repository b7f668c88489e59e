"""
Command-line handlers.
"""
