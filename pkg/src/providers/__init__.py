"""Providers package - sources of RGB + depth samples."""
