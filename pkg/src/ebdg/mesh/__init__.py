"""Meshes, geometric mappings and mesh sources."""
