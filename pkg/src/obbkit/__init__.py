"""Geometry, losses, matching, augmentation and evaluation for oriented boxes."""

__version__ = "0.1.0"

from .attention_geom import HeadSplitStrategy, SamplingSpec, head_angles, rotation_matrix, sampling_locations
from .augment import AnnotatedImage, MosaicSpec, OrientedMosaic, draw_rotations, mosaic, rotate_annotation
from .evalio import (
    AnnotationRecord,
    Detection,
    average_precision,
    parse_dota,
    rotated_iou,
    rotated_nms,
    serialize_dota,
)
from .exceptions import ConfigError, DomainError, NumericalError, ParseError, ShapeError
from .losses import LossWeights, focal_cost, kld_gauss, kld_loss, sp_l1, sp_l1_grad, total_box_loss
from .matching import Assignment, CostMatrix, HungarianMatcher, build_cost_matrix, hausdorff_cost, hungarian
from .obb_core import Gauss2, Obb5, delta_pi, obb_to_gauss, obb_to_quad, quad_to_obb, wrap_pi
from .query_encoding import BoxPositionalEncoder, EncodingConfig, encode_positional, seam_gap
from .refinement import (
    PeriodicRefiner,
    RefineSchedule,
    alpha_at,
    simulate_refinement,
    update_angle,
    update_spatial,
)
