"""Particle approximation of mean reflected SDEs."""
