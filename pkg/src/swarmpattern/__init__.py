"""Local behaviours for emergent swarm pattern formation, with verification and simulation."""

__version__ = "0.1.0"
