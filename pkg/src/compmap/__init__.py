"""Probabilistic occupancy mapping with raw and completed depth."""

from .geometry import CameraIntrinsics, DepthImage, Pose, UncertaintyImage, back_project, project, transform
from .occupancy import MapConfig, OccupancyClass, OccupancyOctree, VoxelData, fuse_sample
from .pipeline import FusionMode, Frame, PixelDecision, SensorConfigs, run_sequence, select_pixel_source

__all__ = [
    "CameraIntrinsics", "DepthImage", "Pose", "UncertaintyImage", "back_project", "project", "transform",
    "MapConfig", "OccupancyClass", "OccupancyOctree", "VoxelData", "fuse_sample",
    "FusionMode", "Frame", "PixelDecision", "SensorConfigs", "run_sequence", "select_pixel_source",
]
__version__ = "0.1.0"
