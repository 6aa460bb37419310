"""Range-dependent physical-layer security for near-field uniform planar arrays."""

__version__ = "0.1.0"
