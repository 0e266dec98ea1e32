"""Batch command line: train, inpaint, separate, enhance.

Design constraints honoured here:

* Thread pinning must beat numpy's import, so this module imports only
  the standard library at module scope; numeric modules load inside the
  command handlers after ``--threads``/``SLICEDICT_THREADS`` is applied.
* Every output gets a run manifest (JSON, sorted keys) next to it so a
  result can always be traced back to its exact configuration.
* Exit codes: 0 success, 1 runtime failure, 2 usage error.
"""

from __future__ import annotations

import argparse
import csv
import datetime
import json
import os
import sys
from pathlib import Path

_THREAD_ENV_VARS = (
    "OMP_NUM_THREADS",
    "OPENBLAS_NUM_THREADS",
    "MKL_NUM_THREADS",
)

_CSV_HEADER = (
    "iter,data_term,l1_term,objective,slice_data_term,max_primal_residual,time_ms"
)

_IMAGE_SUFFIXES = (".pgm", ".ppm", ".pnm")


class UsageError(Exception):
    """Bad flag combination discovered after argparse."""


def _apply_threads(threads: int | None) -> int | None:
    """Pin BLAS pools before numpy first loads.

    Returns the effective thread count (None = library default, i.e.
    machine parallelism). Precedence: --threads flag, then the
    SLICEDICT_THREADS environment variable.
    """
    if threads is None:
        env = os.environ.get("SLICEDICT_THREADS")
        if env:
            try:
                threads = int(env)
            except ValueError:
                raise UsageError(
                    f"SLICEDICT_THREADS must be an integer, got {env!r}"
                ) from None
    if threads is None:
        return None
    if threads < 1:
        raise UsageError("thread count must be >= 1")
    if "numpy" in sys.modules:
        # Pools are already sized; silently lying would be worse.
        print(
            "warning: numpy already imported, thread pinning may not apply",
            file=sys.stderr,
        )
    for var in _THREAD_ENV_VARS:
        os.environ[var] = str(threads)
    return threads


def _utc_now() -> str:
    return datetime.datetime.now(datetime.timezone.utc).isoformat(timespec="seconds")


def _write_manifest(out_path, command: str, config: dict, inputs, started: str):
    from . import __version__

    manifest = {
        "command": command,
        "config": config,
        "inputs": [str(p) for p in inputs],
        "seed": config.get("seed"),
        "started": started,
        "version": __version__,
    }
    path = Path(str(out_path) + ".manifest.json")
    path.write_text(json.dumps(manifest, sort_keys=True, indent=2) + "\n")


def _format_metric(value: float) -> str:
    # repr-faithful and locale-independent; rows must be byte-stable
    # across runs with the same seed.
    return format(value, ".17g")


def _load_gray(path):
    """Read one PGM/PPM and return floats in [0, 1], color reduced to
    BT.601 luma."""
    from .color import bt601_luma
    from .pnm import read_pnm

    img = read_pnm(path)
    values = img.to_float()
    if img.is_color:
        values = bt601_luma(values)
    return values


def _training_images(directory) -> tuple[list, list]:
    """Load every portable-map image in a directory (sorted by name).

    Unreadable files are skipped with a warning; the caller fails only
    when nothing loads.
    """
    from .images import preprocess

    root = Path(directory)
    if not root.is_dir():
        raise UsageError(f"--input {directory} is not a directory")
    images, used = [], []
    for path in sorted(root.iterdir()):
        if path.suffix.lower() not in _IMAGE_SUFFIXES or not path.is_file():
            continue
        try:
            images.append(preprocess(_load_gray(path)))
            used.append(path)
        except Exception as exc:  # noqa: BLE001 - skip-and-warn contract
            print(f"warning: skipping {path}: {exc}", file=sys.stderr)
    return images, used


def cmd_train(args) -> int:
    from .dictfile import dictionary_mosaic, write_dictionary
    from .dictionary import init_dictionary
    from .engine import TrainConfig, train
    from .pnm import write_pgm

    started = _utc_now()
    images, used = _training_images(args.input)
    if not images:
        print(f"error: no readable images in {args.input}", file=sys.stderr)
        return 1
    cfg = TrainConfig(
        lam=args.lam,
        rho=args.rho,
        iters=args.iters,
        subsample=args.subsample,
        seed=args.seed,
    )
    n = args.filter_size * args.filter_size
    D0 = init_dictionary(n, args.filters, seed=args.seed)

    log_path = Path(args.log)
    with open(log_path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(_CSV_HEADER.split(","))

        def on_metrics(row):
            writer.writerow(
                [
                    row.iteration,
                    _format_metric(row.data_term),
                    _format_metric(row.l1_term),
                    _format_metric(row.objective),
                    _format_metric(row.slice_data_term),
                    _format_metric(row.max_primal_residual),
                    _format_metric(row.time_ms),
                ]
            )

        D, _, _ = train(images, cfg, D0, on_metrics=on_metrics)

    write_dictionary(args.out, D)
    mosaic_path = args.mosaic or str(args.out) + ".mosaic.pgm"
    write_pgm(mosaic_path, dictionary_mosaic(D))

    config = {
        "filters": args.filters,
        "filter_size": args.filter_size,
        "lambda": args.lam,
        "rho": args.rho,
        "iters": args.iters,
        "subsample": args.subsample,
        "seed": args.seed,
        "threads": args.threads,
        "preprocessing": ["bt601_luma", "mean_subtract", "contrast_normalize"],
    }
    for out in (args.out, log_path, mosaic_path):
        _write_manifest(out, "train", config, used, started)
    print(f"trained {args.filters} atoms on {len(images)} image(s) -> {args.out}")
    return 0


def _inpaint_mask(args, shape):
    import numpy as np

    from .pnm import observation_mask, read_pnm

    if args.mask is not None:
        mask = observation_mask(read_pnm(args.mask))
        if mask.shape != shape:
            raise UsageError(
                f"mask shape {mask.shape} does not match image shape {shape}"
            )
        return mask
    rng = np.random.default_rng(args.seed)
    return (rng.random(shape) >= args.drop_fraction).astype(np.float64)


def cmd_inpaint(args) -> int:
    from .dictfile import read_dictionary
    from .dictionary import init_dictionary
    from .engine import TrainConfig, inpaint
    from .images import psnr
    from .pnm import write_pgm

    started = _utc_now()
    if args.dict is None and not args.learn_on_input:
        raise UsageError("--dict is required unless --learn-on-input is set")
    if args.mask is not None and args.drop_fraction is not None:
        raise UsageError("--mask and --drop-fraction are mutually exclusive")
    if args.mask is None and args.drop_fraction is None:
        raise UsageError("one of --mask or --drop-fraction is required")
    if args.drop_fraction is not None and not 0.0 <= args.drop_fraction < 1.0:
        raise UsageError("--drop-fraction must be in [0, 1)")

    x = _load_gray(args.input)
    mask = _inpaint_mask(args, x.shape)
    if args.dict is not None:
        D = read_dictionary(args.dict)
    else:
        n = args.filter_size * args.filter_size
        D = init_dictionary(n, args.filters, seed=args.seed)
    cfg = TrainConfig(lam=args.lam, rho=args.rho, iters=args.iters, seed=args.seed)
    restored = inpaint(x, mask, D, cfg, learn_on_corrupted=args.learn_on_input)

    import numpy as np

    write_pgm(args.out, np.clip(restored, 0.0, 1.0))
    reference = args.reference
    if reference is None and args.drop_fraction == 0.0:
        reference = args.input
    if reference is not None:
        value = psnr(_load_gray(reference), restored)
        print(f"PSNR: {value:.2f} dB")

    config = {
        "dict": str(args.dict) if args.dict else None,
        "drop_fraction": args.drop_fraction,
        "filters": None if args.dict else args.filters,
        "filter_size": None if args.dict else args.filter_size,
        "iters": args.iters,
        "lambda": args.lam,
        "learn_on_input": args.learn_on_input,
        "mask": str(args.mask) if args.mask else None,
        "rho": args.rho,
        "seed": args.seed,
        "threads": args.threads,
    }
    _write_manifest(args.out, "inpaint", config, [args.input], started)
    return 0


def _separation_io(args):
    """Load the input for separation/enhancement.

    Returns (channel, recompose, is_color) where channel is the [0, 1]
    layer the algorithm runs on and recompose(new_channel) produces the
    output array (grayscale 2-D, or color (H, W, 3)) ready for writing.
    """
    from .color import lab_to_srgb, srgb_to_lab
    from .pnm import read_pnm

    img = read_pnm(args.input)
    values = img.to_float()
    if not img.is_color:
        return values, (lambda channel: channel), False

    L, a, b = srgb_to_lab(values)

    def recompose(channel):
        return lab_to_srgb(channel * 100.0, a, b)

    return L / 100.0, recompose, True


def _separation_config(args):
    from .separation import SeparationConfig

    return SeparationConfig(
        lam=args.lam,
        rho=args.rho,
        eta=args.eta,
        xi=args.xi,
        iters=args.iters,
        num_filters=args.filters,
        filter_size=args.filter_size,
        seed=args.seed,
    )


def _write_layer(path, values, color: bool):
    import numpy as np

    from .pnm import write_pgm, write_ppm

    if color:
        write_ppm(path, np.clip(values, 0.0, 1.0))
    else:
        write_pgm(path, np.clip(values, 0.0, 1.0))


def _separation_base_config(args) -> dict:
    return {
        "eta": args.eta,
        "filter_size": args.filter_size,
        "filters": args.filters,
        "iters": args.iters,
        "lambda": args.lam,
        "rho": args.rho,
        "seed": args.seed,
        "threads": args.threads,
        "xi": args.xi,
    }


def cmd_separate(args) -> int:
    import numpy as np

    from .dictionary import init_dictionary
    from .pnm import write_pgm
    from .separation import separate

    started = _utc_now()
    channel, recompose, is_color = _separation_io(args)
    cfg = _separation_config(args)
    D0 = init_dictionary(args.filter_size**2, args.filters, seed=args.seed)
    cartoon, texture, _ = separate(channel, D0, cfg)

    _write_layer(args.out_cartoon, recompose(cartoon), is_color)
    # Texture is signed detail around zero; recenter at mid-gray so it
    # is visible in an unsigned image file.
    write_pgm(args.out_texture, np.clip(texture - texture.mean() + 0.5, 0.0, 1.0))

    config = _separation_base_config(args)
    for out in (args.out_cartoon, args.out_texture):
        _write_manifest(out, "separate", config, [args.input], started)
    return 0


def cmd_enhance(args) -> int:
    from .separation import enhance

    started = _utc_now()
    if args.factor < 0:
        raise UsageError("--factor must be >= 0")
    channel, recompose, is_color = _separation_io(args)
    cfg = _separation_config(args)
    boosted = enhance(channel, cfg, args.factor)
    _write_layer(args.out, recompose(boosted), is_color)

    config = _separation_base_config(args)
    config["factor"] = args.factor
    _write_manifest(args.out, "enhance", config, [args.input], started)
    return 0


def _add_common_separation_flags(sub):
    sub.add_argument("--input", required=True, help="input image (PGM/PPM)")
    sub.add_argument("--lambda", dest="lam", type=float, default=0.2,
                     help="texture sparsity weight (default 0.2)")
    sub.add_argument("--xi", type=float, default=0.05,
                     help="cartoon total-variation weight (default 0.05)")
    sub.add_argument("--eta", type=float, default=None,
                     help="cartoon split penalty (default: same as --rho)")
    sub.add_argument("--rho", type=float, default=1.0,
                     help="slice penalty (default 1.0)")
    sub.add_argument("--iters", type=int, default=100,
                     help="outer iterations (default 100)")
    sub.add_argument("--filters", type=int, default=100,
                     help="texture dictionary size (default 100)")
    sub.add_argument("--filter-size", type=int, default=11,
                     help="texture filter side length (default 11)")
    sub.add_argument("--seed", type=int, default=0,
                     help="dictionary init seed (default 0)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="slicedict",
        description=(
            "Slice-based convolutional dictionary learning: train a local "
            "dictionary, inpaint erased pixels, or split an image into "
            "cartoon and texture layers."
        ),
    )
    parser.add_argument(
        "--threads",
        type=int,
        default=None,
        help=(
            "BLAS worker threads (default: machine parallelism; the "
            "SLICEDICT_THREADS environment variable is used when the flag "
            "is absent)"
        ),
    )
    commands = parser.add_subparsers(dest="command", required=True)

    train = commands.add_parser(
        "train", help="learn a dictionary from a directory of images"
    )
    train.add_argument("--input", required=True,
                       help="directory of PGM/PPM training images")
    train.add_argument("--filters", type=int, default=100,
                       help="number of atoms (default 100)")
    train.add_argument("--filter-size", type=int, default=11,
                       help="filter side length (default 11)")
    train.add_argument("--lambda", dest="lam", type=float, default=1.0,
                       help="sparsity weight (default 1.0)")
    train.add_argument("--rho", type=float, default=1.0,
                       help="ADMM penalty (default 1.0)")
    train.add_argument("--iters", type=int, default=300,
                       help="outer iterations (default 300)")
    train.add_argument("--subsample", type=float, default=1.0,
                       help="fraction of slices visited per iteration (default 1)")
    train.add_argument("--seed", type=int, default=0,
                       help="init and subsampling seed (default 0)")
    train.add_argument("--out", required=True, help="dictionary file to write")
    train.add_argument("--log", required=True, help="metrics CSV to write")
    train.add_argument("--mosaic", default=None,
                       help="mosaic image path (default: <out>.mosaic.pgm)")
    train.set_defaults(func=cmd_train)

    inpaint = commands.add_parser("inpaint", help="restore erased pixels")
    inpaint.add_argument("--input", required=True, help="corrupted image")
    inpaint.add_argument("--dict", default=None, help="dictionary file")
    inpaint.add_argument("--mask", default=None,
                         help="observation mask graymap (value > 127 = observed)")
    inpaint.add_argument("--drop-fraction", type=float, default=None,
                         help="generate a random erasure mask instead of --mask")
    inpaint.add_argument("--lambda", dest="lam", type=float, default=0.05,
                         help="sparsity weight (default 0.05)")
    inpaint.add_argument("--rho", type=float, default=1.0,
                         help="ADMM penalty (default 1.0)")
    inpaint.add_argument("--iters", type=int, default=100,
                         help="iterations (default 100)")
    inpaint.add_argument("--seed", type=int, default=0,
                         help="mask/init seed (default 0)")
    inpaint.add_argument("--learn-on-input", action="store_true",
                         help="refine the dictionary on the corrupted image")
    inpaint.add_argument("--filters", type=int, default=100,
                         help="atoms when no --dict is given (default 100)")
    inpaint.add_argument("--filter-size", type=int, default=11,
                         help="filter side when no --dict is given (default 11)")
    inpaint.add_argument("--reference", default=None,
                         help="clean image for PSNR reporting")
    inpaint.add_argument("--out", required=True, help="restored image to write")
    inpaint.set_defaults(func=cmd_inpaint)

    separate = commands.add_parser(
        "separate", help="split an image into cartoon and texture layers"
    )
    _add_common_separation_flags(separate)
    separate.add_argument("--out-cartoon", required=True,
                          help="cartoon layer image to write")
    separate.add_argument("--out-texture", required=True,
                          help="texture layer image to write (mid-gray shifted)")
    separate.set_defaults(func=cmd_separate)

    enhance = commands.add_parser(
        "enhance", help="boost or mute the texture layer"
    )
    _add_common_separation_flags(enhance)
    enhance.add_argument("--factor", type=float, required=True,
                         help="texture multiplier (1 = unchanged)")
    enhance.add_argument("--out", required=True, help="enhanced image to write")
    enhance.set_defaults(func=cmd_enhance)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else 0
    try:
        _apply_threads(args.threads)
        return args.func(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
