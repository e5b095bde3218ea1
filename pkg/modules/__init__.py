# Flooding search simulator for unstructured P2P overlays
__version__ = "1.0.0"
