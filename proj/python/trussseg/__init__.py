"""Truss segmentation for LiDAR scans."""

from ._core import (
    Error,
    config_text,
    estimate_normals,
    evaluate,
    modes,
    presets,
    read_pcd,
    segment,
    select_threshold,
    simulate_scan,
    write_pcd,
)

__all__ = [
    "Error",
    "config_text",
    "estimate_normals",
    "evaluate",
    "modes",
    "presets",
    "read_pcd",
    "segment",
    "select_threshold",
    "simulate_scan",
    "write_pcd",
]
