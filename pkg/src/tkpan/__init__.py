"""T-shaped adaptive-dilation convolution for single-image stereo view synthesis."""

from .geometry import (
    BaselineTable,
    local_disparity,
    max_disparity,
    primitive_disparity,
    primitive_disparity_loss,
    primitive_occlusion,
    scale_pan,
    spp_blend,
)
from .image import (
    downscale_bilinear_2x,
    sample_linear_h,
    sample_linear_v,
    shift_downscale,
    upscale_bilinear_2x,
    upscale_nearest_2x,
)
from .metrics import LossReport, DepthMetrics, depth_metrics, image_metrics, pan_loss
from .parallel import get_num_threads, set_num_threads
from .srstack import ShiftStack, averaging_stage, build_stack, fuse, zero_stage
from .tkernel import (
    PanSpec,
    blend_backward,
    blend_forward,
    dilation_schedule,
    tconv_backward,
    tconv_forward,
)
from .toytrain import SceneOracle, TrainState, eval_toy, make_scene, train_toy

__version__ = "0.1.0"
