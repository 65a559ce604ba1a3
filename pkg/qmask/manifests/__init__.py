"""Bundled run manifests, listed by ``qmask examples``."""
