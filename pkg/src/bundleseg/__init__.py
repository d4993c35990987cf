"""Example-based white-matter bundle segmentation with anatomical cost terms.

Streamlines of a target tractogram are matched to example bundles by a
rectangular linear assignment whose cost fuses shape, endpoint and
ROI-based distances.
"""
__version__ = "0.1.0"

from ._backend import BACKEND
from .core import Bundle, RoiMask, Streamline, Tractogram, VoxelGrid, validate_streamline, voxel_center
from .errors import BundleSegError, DataError
from .evaluation import VoxelSet, dsc, voxelize
from .lap import Assignment, brute_force_lap, solve_lap, solve_rlap
from .metrics import RoiSet, d_end, d_mc, d_min_roi, d_rois
from .segmentation import CostWeights, SegmentationConfig, segment_multi, segment_single

__all__ = [
    "BACKEND", "Assignment", "Bundle", "BundleSegError", "CostWeights", "DataError", "RoiMask",
    "RoiSet", "SegmentationConfig", "Streamline", "Tractogram", "VoxelGrid", "VoxelSet",
    "brute_force_lap", "d_end", "d_mc", "d_min_roi", "d_rois", "dsc", "segment_multi",
    "segment_single", "solve_lap", "solve_rlap", "validate_streamline", "voxel_center", "voxelize",
]
