"""Compiled kernels. Built from ``kernels.pyx`` by ``setup.py``."""
