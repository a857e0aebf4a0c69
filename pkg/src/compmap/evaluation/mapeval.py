from dataclasses import dataclass

from .. import _octree
from ..occupancy import OccupancyOctree, logit


@dataclass(frozen=True)
class FreeSpaceReport:
    correct_free: float
    incorrect_free: float


def compare_free_space(recon: OccupancyOctree, gt: OccupancyOctree, recon_threshold: float = 0.0004,
                       gt_threshold: float = 0.03) -> FreeSpaceReport:
    """Volume free in both maps vs. free in ``recon`` only.

    Each map uses its own free threshold; both trees are walked together, so
    homogeneous regions are counted without expanding them.
    """
    if not recon.same_config(gt):
        raise ValueError("maps have different configurations")
    correct, wrong = _octree.compare_free(
        recon._child, recon._fmin, recon._fmax, recon._allobs, logit(recon_threshold),
        gt._child, gt._fmin, gt._fmax, gt._allobs, logit(gt_threshold), recon.depth)
    v = recon.config.voxel_volume
    return FreeSpaceReport(int(correct) * v, int(wrong) * v)
