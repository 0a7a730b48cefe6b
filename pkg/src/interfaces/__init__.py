"""Interfaces package - abstract contracts and the error hierarchy."""
