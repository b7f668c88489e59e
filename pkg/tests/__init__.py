"""
Test package for Netanya Incident Service.
"""
