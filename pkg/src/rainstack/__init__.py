"""Multi-frame deraining from temporal statistics, blending and brightness correction."""

from .brightness import (
    ChannelAffine,
    PixelSampleSet,
    apply_affine,
    draw_sample_set,
    fit_affine,
    fit_affine_plus,
)
from .ensemble import DEFAULT_WEIGHT, tune_weight, weighted_average
from .metrics import MetricReport, evaluate_scene, psnr, ssim
from .patchmatch import PatchMatchConfig, estimate_pixel, estimate_pixels
from .pipeline import PipelineConfig, run_pipeline
from .provider import ProviderKind, provide_restored
from .scene_io import (
    ReferencePair,
    SceneStack,
    load_image,
    load_reference_library,
    load_scene,
    save_image,
)
from .synth import RainSceneSpec, generate_reference_library, generate_scene
from .temporal import temporal_mean, temporal_median

__version__ = "0.1.0"
