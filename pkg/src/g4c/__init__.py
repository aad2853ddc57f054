"""Rate-distortion optimized compression of dynamic Gaussian splatting scenes.

The scene model keeps static Gaussians (pivot plus linear displacement) and
dynamic Gaussians (keyframed positions and rotations with a temporal opacity
window).  Compression prunes Gaussians and SH bands, vector-quantizes
appearance with an entropy-constrained codebook, codes trajectories as
masked Haar coefficients and range-codes everything into a ``.g4c`` file.
"""
__version__ = "0.1.0"

from .codec import CompressedContainer, RateReport, decode_scene, encode_scene, size_report
from .errors import (CorruptionError, DecodingError, EncodingError, FormatError, G4CError,
                     ValidationError)
from .model import DynamicGaussians, GaussianScene, StaticGaussians, scene_digest
from .presets import LevelPreset, level_preset
from .synth import SynthConfig, generate_synthetic_scene, standard_scene

__all__ = [
    "CompressedContainer", "CorruptionError", "DecodingError", "DynamicGaussians",
    "EncodingError", "FormatError", "G4CError", "GaussianScene", "LevelPreset", "RateReport",
    "StaticGaussians", "SynthConfig", "ValidationError", "decode_scene", "encode_scene",
    "generate_synthetic_scene", "level_preset", "scene_digest", "size_report", "standard_scene",
]
