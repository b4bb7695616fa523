"""Visuotactile sensor simulator and multimodal VAE.

Arrays are numpy; images are (rows, cols, 3) float32 in [0, 1], depth and
clearance maps are (rows, cols) in meters.
"""

from ._stsim import (
    DEFAULT_GEL_THICKNESS,
    DEFAULT_SPRING_STIFFNESS,
    Model,
    SaturationError,
    __version__,
    bce_logits,
    clip_depth,
    gaussian_kl,
    incline_outcome,
    list_episodes,
    normals,
    poe_fuse,
    read_episode,
    render_flat,
    render_tactile,
    simulate_episode,
    solve_equilibrium,
)

__all__ = [
    "DEFAULT_GEL_THICKNESS",
    "DEFAULT_SPRING_STIFFNESS",
    "Model",
    "SaturationError",
    "__version__",
    "bce_logits",
    "clip_depth",
    "gaussian_kl",
    "incline_outcome",
    "list_episodes",
    "normals",
    "poe_fuse",
    "read_episode",
    "render_flat",
    "render_tactile",
    "simulate_episode",
    "solve_equilibrium",
]
