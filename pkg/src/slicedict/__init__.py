"""Slice-based convolutional dictionary learning.

A global convolutional sparse model is trained through purely local
computations: every pixel-aligned patch of the image is written as a
small dictionary times a sparse coefficient vector, and an ADMM loop
keeps the overlapping local pieces consistent with each other.

Submodules
----------
images      patch/slice extraction, aggregation, preprocessing, PSNR
pursuit     batched LASSO needle pursuit (coordinate descent)
dictionary  local dictionary initialization and K-SVD style update
engine      ADMM training loop, slice updates, inpainting
separation  TV-regularized texture/cartoon splitting and enhancement
synthetic   generators and evaluation helpers for controlled studies
pnm         portable anymap (PGM/PPM) reader and writer
color       grayscale conversion and sRGB <-> CIELAB transforms
dictfile    dictionary container file and filter mosaic rendering
cli         batch command line interface
"""

from importlib import import_module

_SUBMODULES = (
    "images",
    "pursuit",
    "dictionary",
    "engine",
    "separation",
    "synthetic",
    "pnm",
    "color",
    "dictfile",
    "cli",
)

_EXPORTS = {
    # images
    "PatchGeometry": "images",
    "extract_patch": "images",
    "place_patch_accumulate": "images",
    "extract_slices": "images",
    "aggregate": "images",
    "preprocess": "images",
    "psnr": "images",
    # pursuit
    "PursuitConfig": "pursuit",
    "Needle": "pursuit",
    "gram": "pursuit",
    "lasso_solve": "pursuit",
    "lasso_solve_batch": "pursuit",
    "kkt_residual": "pursuit",
    # dictionary
    "init_dictionary": "dictionary",
    "dictionary_update": "dictionary",
    # engine
    "SliceField": "engine",
    "TrainConfig": "engine",
    "MetricsRow": "engine",
    "init_slicefield": "engine",
    "slice_update": "engine",
    "masked_slice_update": "engine",
    "dual_update": "engine",
    "csc_objective": "engine",
    "train": "engine",
    "inpaint": "engine",
    # separation
    "SeparationConfig": "separation",
    "tv_denoise": "separation",
    "joint_texture_cartoon_update": "separation",
    "separate": "separation",
    "enhance": "separation",
    # synthetic
    "planted_dictionary": "synthetic",
    "sparse_needle_field": "synthetic",
    "compose_image": "synthetic",
    "incoherent_balanced_atoms": "synthetic",
    "RecoveryInstance": "synthetic",
    "recovery_instance": "synthetic",
    "SeparationInstance": "synthetic",
    "textured_composite": "synthetic",
    "oscillating_atoms": "synthetic",
    "blocky_cartoon": "synthetic",
    "match_atoms": "synthetic",
    # io
    "PnmImage": "pnm",
    "PnmError": "pnm",
    "read_pnm": "pnm",
    "write_pgm": "pnm",
    "write_ppm": "pnm",
    "observation_mask": "pnm",
    "bt601_luma": "color",
    "srgb_to_lab": "color",
    "lab_to_srgb": "color",
    "DictionaryFileError": "dictfile",
    "read_dictionary": "dictfile",
    "write_dictionary": "dictfile",
    "dictionary_mosaic": "dictfile",
}

__version__ = "0.1.0"
__all__ = sorted(_EXPORTS) + list(_SUBMODULES)


def __getattr__(name):
    # Lazy imports keep `import slicedict` free of numpy until a numeric
    # symbol is touched, so the CLI can pin BLAS thread counts first.
    if name in _EXPORTS:
        return getattr(import_module(f".{_EXPORTS[name]}", __name__), name)
    if name in _SUBMODULES:
        return import_module(f".{name}", __name__)
    raise AttributeError(f"module {__name__!r} has no attribute {name!r}")


def __dir__():
    return __all__
