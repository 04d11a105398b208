"""Griffith fracture in thin elastic beams: the bending limit, plate discretisations and rigidity diagnostics."""

from .material import QuadraticDistance, StVenantKirchhoff, model_from_config, relaxed_alpha

__all__ = ["QuadraticDistance", "StVenantKirchhoff", "model_from_config", "relaxed_alpha"]
__version__ = "0.1.0"
