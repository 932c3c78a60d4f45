"""Topology synthesis of contact-aided compliant mechanisms on honeycomb meshes."""

__version__ = "0.1.0"
