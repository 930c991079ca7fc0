"""V-variable lossy compression of grayscale images."""

from .clustering import Clustering, VectorSet, dedupe, kmeans, nearest_centroid
from .engine import EncodeSettings, decode, decode_pixel, encode, verify_v_variability
from .image import (
    GrayImage,
    address_to_pixel,
    block_variation,
    extract_pieces,
    from_square,
    load_pgm,
    pixel_to_address,
    save_pgm,
    to_square,
)
from .model import (
    VTuple,
    VVarCode,
    active_levels,
    constant_proportions,
    deserialize,
    serialize,
    storage_upper_bound,
    storage_with_constants,
)
from .rd import frontier, presets, psnr, sweep

__version__ = "0.1.0"
