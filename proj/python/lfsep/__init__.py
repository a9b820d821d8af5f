"""Reflection separation with a simulated light-field camera."""

from ._lfsep import (
    CameraConfig,
    PsfKernelBank,
    build_psf_bank,
    camera_preset,
    depth_levels,
    desk_camera,
    manifest_yaml,
    ncc,
    project_simplex,
    read_pfm,
    reconstruct_layers,
    reference_camera,
    run_command,
    simulate_observation,
    texture_corpus,
    write_pfm,
)

__all__ = [
    "CameraConfig",
    "PsfKernelBank",
    "build_psf_bank",
    "camera_preset",
    "depth_levels",
    "desk_camera",
    "manifest_yaml",
    "ncc",
    "project_simplex",
    "read_pfm",
    "reconstruct_layers",
    "reference_camera",
    "run_command",
    "simulate_observation",
    "texture_corpus",
    "write_pfm",
]
