"""Weight clustering with distillation and multiplication-free LUT inference."""

from .core import (CompressedLayer, Clustering, DataError, FormatError,
                   HessianDiag, HyperParams, InvariantError, LayerBundle,
                   load_compressed_layer, load_layer_bundle, pack_indices,
                   save_compressed_layer, save_layer_bundle, unpack_indices)
from .cluster_opt import merge_closest, optimize_layer
from .density_init import density_init, estimate_sigma
from .hessian import clustering_loss, compute_hessian_diag, \
    output_reconstruction_loss
from .lutkernel import (BucketLUT, QuantParams, build_bucket_lut,
                        derive_activation_scale, lut_forward, lut_matmul,
                        quantize_input, reference_forward)
from .pipeline import compress_bundle
from .smooth import apply_smoothing, search_smoothing

__version__ = "0.1.0"

__all__ = [
    "BucketLUT", "Clustering", "CompressedLayer", "DataError", "FormatError",
    "HessianDiag", "HyperParams", "InvariantError", "LayerBundle",
    "QuantParams", "apply_smoothing", "build_bucket_lut", "clustering_loss",
    "compress_bundle", "compute_hessian_diag", "density_init",
    "derive_activation_scale", "estimate_sigma", "load_compressed_layer",
    "load_layer_bundle", "lut_forward", "lut_matmul", "merge_closest",
    "optimize_layer", "output_reconstruction_loss", "pack_indices",
    "quantize_input", "reference_forward", "save_compressed_layer",
    "save_layer_bundle", "search_smoothing", "unpack_indices",
]
