"""Verification laboratory for spacelike hypersurfaces in GRW spacetimes."""

__version__ = "0.1.0"
