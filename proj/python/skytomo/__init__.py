"""Monte Carlo rendering and scattering tomography of aerosol fields."""

from ._core import (
    Camera,
    DivergenceError,
    ParseError,
    Scene,
    ValidationError,
    derive_seed,
    error_metrics,
    fit_scale,
    hg_cos_from_uniform,
    load_scene,
    make_preset,
    phase_hg,
    phase_rayleigh,
    preset_names,
    rayleigh_cos_from_uniform,
    render_bmc,
    render_fmc,
    render_single_scatter,
    render_vfmc,
    sun_mask,
)

CHANNELS = ("R", "G", "B")

__all__ = [
    "CHANNELS",
    "Camera",
    "DivergenceError",
    "ParseError",
    "Scene",
    "ValidationError",
    "derive_seed",
    "error_metrics",
    "fit_scale",
    "hg_cos_from_uniform",
    "load_scene",
    "make_preset",
    "phase_hg",
    "phase_rayleigh",
    "preset_names",
    "rayleigh_cos_from_uniform",
    "render_bmc",
    "render_fmc",
    "render_single_scatter",
    "render_vfmc",
    "sun_mask",
]
