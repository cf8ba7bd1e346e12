"""Video-to-4D reconstruction via dynamic-static feature decoupling and
temporal-spatial fusion, on synthetic scenes with known ground truth."""

from .autodiff import Tensor
from .camera import Camera, camera_project, orbit_camera
from .decouple import (DecoupledFeatures, ReferenceFeatures, decouple,
                       decouple_all, decouple_all_pairs, dynamic_heatmap,
                       select_references)
from .deform import Deformation, apply_deformation, deform
from .errors import (CheckError, ConfigError, DS4DError, DataError,
                     DomainError, IOFormatError, OptimizerError, ShapeError)
from .estimator import DS4DReconstructor, as_dataset, check_dataset
from .features import FeatureSet, FrameFeatures, extract_feature_set, extract_features
from .fusion import FusionResult, average_fuse, da_fuse, fuse_gaussian_features, ga_fuse
from .hexplane import HexPlaneField, hexplane_query, init_hexplane
from .losses import (LossWeights, loss_mask, loss_perceptual_proxy, loss_rec,
                     total_loss)
from .metrics import MetricReport, dssim, psnr, ssim
from .nn import (AdamState, LinearLayer, Mlp, adam_step, grad_check,
                 init_linear, init_mlp, linear_apply, mlp_apply, softmax)
from .points import (GaussianPointSet, PointFeatures, init_points,
                     nearest_neighbor_stats, retrieve_point_features)
from .render import RenderedFrame, splat_render
from .scene import (SceneDataset, SceneSpec, SyntheticScene, default_cameras,
                    generate_scene, render_dataset)
from .train import (DS4DModel, GradAccumulator, TrainConfig, densify, evaluate,
                    lr_schedule, run_ablation, train_dynamic_stage,
                    train_full, train_static_stage)

__version__ = "0.1.0"
