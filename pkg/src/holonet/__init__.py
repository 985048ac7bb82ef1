"""Holographic isometric tensor network states for 1D quantum systems."""
