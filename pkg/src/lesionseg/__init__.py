"""Unsupervised bright-lesion segmentation toolkit.

Segments bright lesions in 2D grayscale images with three unsupervised
methods (k-means clustering, Gaussian-mixture EM, marker-controlled
watershed), evaluates predictions against ground-truth masks (Dice, Jaccard,
Hausdorff, precision, recall) and aggregates results corpus-wide. A seeded
phantom generator provides exact ground truth for verification.
"""

__version__ = "0.1.0"

from .errors import (
    BoundsError,
    ConfigError,
    DegenerateInputError,
    FormatError,
    MarkerConflictError,
    ShapeMismatchError,
    ToolkitError,
    UndefinedMetricError,
)
from .gmm import GmmParams, GmmResult, Posteriors, e_step, gaussian_pdf, gmm_segment, log_likelihood, m_step
from .kmeans import KmeansConfig, KmeansResult, init_centroids_farthest, kmeans_cluster
from .metrics import (
    CaseMetrics,
    ConfusionCounts,
    MetricReport,
    aggregate,
    confusion,
    dice,
    evaluate_pair,
    hausdorff,
    jaccard,
    precision_recall,
)
from .model import (
    BinaryMask,
    GrayImage,
    LabelMap,
    PixelSpacing,
    RegionOfInterest,
    crop_roi,
    select_lesion_cluster,
)
from .phantom import Disk, PhantomSpec, generate_phantom
from .pipeline import PipelineConfig, run_segmentation
from .preprocess import ClaheConfig, clahe
from .watershed import (
    DEFAULT_MARKER_COUNT,
    MarkerSet,
    StructuringElement,
    mcwt_segment,
    morphological_gradient,
    select_markers,
    watershed_flood,
)

__all__ = [name for name in dir() if not name.startswith("_")]
