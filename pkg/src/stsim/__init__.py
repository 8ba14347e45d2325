"""Shift-tolerant learned perceptual image similarity metric.

Feature-extraction backbones built from anti-aliased operators, a
trained linear distance head, and the evaluation harness (shifted-crop
construction, rank-flip rate, 2AFC, JND average precision) used to
measure shift tolerance.
"""

from .aa import (
    AAConvVariant,
    BlurKernel,
    aa_skip_block,
    aa_strided_conv,
    avg_blurpool,
    binomial_kernel,
    blurpool,
    fconv,
    max_blurpool,
)
from .backbone import (
    BackboneConfig,
    ConvDef,
    FeatureStack,
    LayerSpec,
    describe,
    forward,
    parameter_count,
    preset,
    random_weights,
)
from .errors import (
    ConfigurationError,
    DecodeError,
    DivergenceError,
    FormatError,
    InvalidArgumentError,
    StsimError,
    WeightNotFoundError,
)
from .harness import (
    EvalReport,
    ShiftedSample,
    aggregate_by_category,
    difference_maps,
    evaluate,
    jnd_map,
    rank_flip_rate,
    shift_crop,
    smoothed_noise,
    synth_dataset,
    two_afc,
)
from .config import config_from_json, config_to_json, load_config, save_config
from .images import decode_image, encode_image
from .manifest import load_pair_manifest, load_triplet_manifest
from .metric import (
    LinearHead,
    TrainOpts,
    TripletSample,
    distance,
    grad_check,
    normalize_channels,
    preference,
    train_head,
    uniform_head,
)
from .tensor import (
    ConvSpec,
    PaddingSpec,
    avgpool,
    conv2d,
    downsample,
    maxpool,
    pad,
    relu,
    shift_circular,
)
from .weights import WeightStore, load_weights, save_weights

__version__ = "0.1.0"
