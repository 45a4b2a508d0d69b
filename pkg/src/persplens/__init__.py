"""persplens: vanishing-point ray-sweep edge profiles, a differentiable
perspective loss with an analytic pixel-space gradient, and synthetic
wireframe tooling to exercise it.

The loss sweeps rays from each vanishing point across an image, sums the
absolute perpendicular Sobel-gradient component along every ray into an
edge profile, and compares profiles between two images. Scenes with known
vanishing points, an anti-aliased wireframe renderer, and controlled
perspective-breaking distortions make the whole pipeline testable at desk
scale.
"""

from .errors import (AllInfiniteError, BadChannelsError, BadCountError,
                     BadStepError, DegeneratePencilError,
                     DimensionMismatchError, EmptyVPSetError,
                     ImageTooSmallError, NonPositiveDepthError,
                     NumericalRangeError, OutOfBoundsError, ParseError,
                     PersplensError, SchemaVersionError, SizeTooLargeError,
                     TooFewSegmentsError)
from .geometry import (AngleRange, Camera, ClipInterval, Direction3, ImageRect,
                       InfiniteVP, Point3, RaySample, VanishingPoint,
                       VanishingPointSet, Vec2, VPSource, angle_fan,
                       clip_ray_to_rect, image_angle_range, line_pixels,
                       perp_vector, project_point,
                       vanishing_point_of_direction)
from .gradients import (GradientField, Image, sample_gradient, sobel, to_luma)
from .loss import (CompositeLossConfig, EdgeProfile, GradCheckResult,
                   LossReport, PerspLossConfig, PixelGradient, Reduction,
                   composite_loss, edge_profile, finite_diff_gradient,
                   gradient_check, optimize_image, persp_loss,
                   persp_loss_backward, search_lr)
from .synth import (DistortionSpec, RenderConfig, WireframeScene,
                    distort_render, ground_truth_vps, make_box_scene,
                    project_scene_segments, read_scene, render_wireframe,
                    scene_annotations, write_scene)
from .vptools import (AnnotationSet, ConcurrencyReport, FamilyCheck, Segment2,
                      consistency_check, estimate_vp, read_annotations,
                      write_annotations)

__version__ = "0.1.0"
