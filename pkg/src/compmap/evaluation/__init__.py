"""Quantitative evaluation of depth predictions, uncertainties and maps."""

from .depth import DELTA_THRESHOLDS, DepthMetrics, ause, depth_metrics, sparsification_curve
from .loss import LossConfig, loss_eq1, nll_gradients, sobel_edges, ssim, ssim_map
from .mapeval import FreeSpaceReport, compare_free_space
from .mesh import Mesh, marching_cubes, mesh_accuracy, point_to_mesh_distance, read_ply, write_ply

__all__ = [
    "DELTA_THRESHOLDS", "DepthMetrics", "ause", "depth_metrics", "sparsification_curve",
    "LossConfig", "loss_eq1", "nll_gradients", "sobel_edges", "ssim", "ssim_map",
    "FreeSpaceReport", "compare_free_space",
    "Mesh", "marching_cubes", "mesh_accuracy", "point_to_mesh_distance", "read_ply", "write_ply",
]
