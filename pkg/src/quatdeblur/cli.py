"""Command-line interface: ``qdeblur <command> ...``.

Commands: ``deblur``, ``estimate-kernel``, ``blur``, ``evaluate``,
``kernel-view``.  Exit status is 0 on success, 2 for usage, I/O and
validation problems, 3 when a solver hits a numerical failure.
"""

import argparse
import json
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor

import cv2
import numpy as np

from .errors import NumericalError
from .image_domain import load_image, save_image
from .kernel_io import read_kernel, write_kernel
from .kernel_solver import estimate_kernel, estimate_kernel_cck, project_kernel
from .metrics import error_map_image, mean_ciede2000, psnr, scielab_map, ssim
from .normalizer import normalize_kernel, normalize_l1
from .pipeline import SolverConfig, blind_deblur, synth_blur
from .quat_core import QuatKernel

__all__ = ["main", "build_parser", "load_config_file", "resolve_config", "render_kernel"]

log = logging.getLogger("quatdeblur")

EXIT_OK, EXIT_USAGE, EXIT_NUMERICAL = 0, 2, 3
IMAGE_EXTS = (".png", ".ppm")

# flag name -> SolverConfig field; every field is exposed.
CONFIG_FLAGS = {
    "lambda": "lam",
    "gamma": "gamma",
    "beta_max": "beta_max",
    "outer_iters": "outer_iters",
    "kernel_size": "kernel_size",
    "pyramid_scale": "pyramid_scale",
    "min_kernel": "min_kernel",
    "cg_iters": "cg_iters",
    "cg_tol": "cg_tol",
    "clip_ratio": "clip_ratio",
    "final_lambda": "final_lambda",
    "boundary": "boundary",
}
_FIELD_TYPES = {"lam": float, "gamma": float, "beta_max": float, "outer_iters": int, "kernel_size": int,
                "pyramid_scale": float, "min_kernel": int, "cg_iters": int, "cg_tol": float,
                "clip_ratio": float, "final_lambda": float, "boundary": str}


class UsageError(ValueError):
    pass


def _nonneg_float(text):
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
    if not np.isfinite(value) or value < 0:
        raise argparse.ArgumentTypeError(f"must be a non-negative number, got {text}")
    return value


def _pos_float(text):
    value = _nonneg_float(text)
    if value == 0:
        raise argparse.ArgumentTypeError("must be positive")
    return value


def _pos_int(text):
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if value < 1:
        raise argparse.ArgumentTypeError(f"must be at least 1, got {value}")
    return value


def _nonneg_int(text):
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if value < 0:
        raise argparse.ArgumentTypeError(f"must be non-negative, got {value}")
    return value


def load_config_file(path):
    """Parse ``key = value`` lines (``#`` starts a comment) into SolverConfig fields."""
    values = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise UsageError(f"{path}:{lineno}: expected key=value, got {line!r}")
            key, value = (s.strip() for s in line.split("=", 1))
            name = CONFIG_FLAGS.get(key.replace("-", "_"), key)
            if name not in _FIELD_TYPES:
                raise UsageError(f"{path}:{lineno}: unknown setting {key!r}")
            try:
                values[name] = _FIELD_TYPES[name](value)
            except ValueError:
                raise UsageError(f"{path}:{lineno}: bad value for {key}: {value!r}") from None
    return values


def resolve_config(args):
    """Defaults, overridden by the config file, overridden by explicit flags."""
    values = {}
    if getattr(args, "config", None):
        if not os.path.isfile(args.config):
            raise FileNotFoundError(f"no such config file: {args.config}")
        values.update(load_config_file(args.config))
    for flag, name in CONFIG_FLAGS.items():
        value = getattr(args, flag, None)
        if value is not None:
            values[name] = value
    return SolverConfig(**values)


def _add_config_flags(p):
    g = p.add_argument_group("solver settings (flags > --config file > defaults)")
    g.add_argument("--config", help="key=value settings file")
    g.add_argument("--lambda", dest="lambda", type=_pos_float, help="L0 gradient weight (0.004..0.02 typical)")
    g.add_argument("--gamma", type=_pos_float, help="kernel Tikhonov weight")
    g.add_argument("--beta-max", dest="beta_max", type=_pos_float, help="final HQS penalty")
    g.add_argument("--outer-iters", dest="outer_iters", type=_nonneg_int, help="alternations per pyramid level")
    g.add_argument("--kernel-size", dest="kernel_size", type=_pos_int, help="odd kernel support at full resolution")
    g.add_argument("--pyramid-scale", dest="pyramid_scale", type=_pos_float, help="per-level shrink factor")
    g.add_argument("--min-kernel", dest="min_kernel", type=_pos_int, help="kernel size at the coarsest level")
    g.add_argument("--cg-iters", dest="cg_iters", type=_pos_int, help="CG iteration cap for the kernel step")
    g.add_argument("--cg-tol", dest="cg_tol", type=_pos_float, help="CG relative residual target")
    g.add_argument("--clip-ratio", dest="clip_ratio", type=_nonneg_float, help="kernel clipping threshold")
    g.add_argument("--final-lambda", dest="final_lambda", type=_pos_float, help="L0 weight of the final pass")
    g.add_argument("--boundary", choices=("taper", "periodic"), help="boundary handling")


def build_parser():
    parser = argparse.ArgumentParser(prog="qdeblur", description="Colour blind deconvolution with quaternion kernels.")
    parser.add_argument("-v", "--verbose", action="count", default=0, help="more logging (repeatable)")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("deblur", help="blind deconvolution of one image or a directory of images")
    p.add_argument("-i", "--input", required=True, help="blurred PNG/PPM, or a directory of them")
    p.add_argument("-o", "--output", required=True, help="restored image (or output directory)")
    p.add_argument("--kernel-out", help="QKERN file for the estimated kernel (directory in batch mode)")
    p.add_argument("--diagnostics", help="JSON file with per-level diagnostics (directory in batch mode)")
    p.add_argument("--bit-depth", type=int, choices=(8, 16), default=8)
    p.add_argument("--jobs", type=_pos_int, default=1, help="parallel images in batch mode")
    _add_config_flags(p)

    p = sub.add_parser("estimate-kernel", help="kernel from a sharp/blurred pair")
    p.add_argument("--sharp", required=True)
    p.add_argument("--blurred", required=True)
    p.add_argument("--mode", choices=("cck", "qck-l1", "qck-norm"), default="qck-norm")
    p.add_argument("-o", "--output", required=True, help="QKERN file")
    p.add_argument("--kernel-size", dest="kernel_size", type=_pos_int, default=25)
    p.add_argument("--gamma", type=_pos_float, default=2.0)
    p.add_argument("--cg-iters", dest="cg_iters", type=_pos_int, default=50)
    p.add_argument("--cg-tol", dest="cg_tol", type=_pos_float, default=1e-6)
    p.add_argument("--clip-ratio", dest="clip_ratio", type=_nonneg_float, default=0.05)
    p.add_argument("--reapply", help="write the sharp image blurred with the estimated kernel")

    p = sub.add_parser("blur", help="apply a kernel file to an image")
    p.add_argument("-i", "--input", required=True)
    p.add_argument("-k", "--kernel", required=True)
    p.add_argument("-o", "--output", required=True)
    p.add_argument("--sigma", type=_nonneg_float, default=0.0, help="Gaussian noise level")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--boundary", choices=("periodic", "replicate"), default="periodic")
    p.add_argument("--bit-depth", type=int, choices=(8, 16), default=8)

    p = sub.add_parser("evaluate", help="quality and colour-error metrics")
    p.add_argument("reference")
    p.add_argument("test")
    p.add_argument("--ppd", type=_pos_float, default=23.0, help="pixels per degree for S-CIELAB")
    p.add_argument("--threshold", type=_nonneg_float, default=5.0, help="S-CIELAB exceedance threshold")
    p.add_argument("--map", help="PNG with pixels over the threshold tinted green")
    p.add_argument("--json-out", help="also write the JSON report here")

    p = sub.add_parser("kernel-view", help="render Q0..Q3 side by side")
    p.add_argument("-k", "--kernel", required=True)
    p.add_argument("-o", "--output", required=True)
    p.add_argument("--scale", type=_pos_int, default=16, help="output pixels per kernel tap")
    return parser


def _need_file(path):
    if not os.path.isfile(path):
        raise FileNotFoundError(f"no such file: {path}")


def _deblur_one(src, dst, kernel_out, diag_out, cfg, bit_depth):
    f = load_image(src)
    result = blind_deblur(f, cfg)
    save_image(result.latent, dst, bit_depth)
    if kernel_out:
        t = result.scale_history[-1].t if result.scale_history else None
        write_kernel(kernel_out, result.kernel, "qck-norm", t)
    if diag_out:
        with open(diag_out, "w", encoding="utf-8") as fh:
            json.dump({"input": os.fspath(src), "config": cfg.to_dict(), **result.diagnostics_dict()}, fh, indent=2)
    return dst


def cmd_deblur(args):
    cfg = resolve_config(args)
    if os.path.isdir(args.input):
        names = sorted(n for n in os.listdir(args.input) if n.lower().endswith(IMAGE_EXTS))
        if not names:
            raise UsageError(f"no PNG/PPM images in {args.input}")
        os.makedirs(args.output, exist_ok=True)
        for d in (args.kernel_out, args.diagnostics):
            if d:
                os.makedirs(d, exist_ok=True)
        jobs = []
        for n in names:
            stem = os.path.splitext(n)[0]
            jobs.append((
                os.path.join(args.input, n),
                os.path.join(args.output, stem + ".png"),
                os.path.join(args.kernel_out, stem + ".qkern") if args.kernel_out else None,
                os.path.join(args.diagnostics, stem + ".json") if args.diagnostics else None,
                cfg, args.bit_depth,
            ))
        if args.jobs > 1:
            with ProcessPoolExecutor(max_workers=args.jobs) as pool:
                for out in pool.map(_deblur_one, *zip(*jobs)):
                    log.info("wrote %s", out)
        else:
            for job in jobs:
                log.info("wrote %s", _deblur_one(*job))
        return EXIT_OK
    _need_file(args.input)
    _deblur_one(args.input, args.output, args.kernel_out, args.diagnostics, cfg, args.bit_depth)
    return EXIT_OK


def cmd_estimate_kernel(args):
    for path in (args.sharp, args.blurred):
        _need_file(path)
    u = load_image(args.sharp)
    f = load_image(args.blurred)
    if u.shape != f.shape:
        raise UsageError(f"sharp {u.shape[:2]} and blurred {f.shape[:2]} images differ in size")
    t = None
    if args.mode == "cck":
        k2 = estimate_kernel_cck(u, f, args.kernel_size, args.gamma, args.cg_iters, args.cg_tol)
        k = QuatKernel.from_components(k2)
    else:
        k = project_kernel(estimate_kernel(u, f, args.kernel_size, args.gamma, args.cg_iters, args.cg_tol),
                           args.clip_ratio)
        if args.mode == "qck-l1":
            k = normalize_l1(k)
        else:
            k, scales = normalize_kernel(k, u, f)
            t = scales.t
    write_kernel(args.output, k, args.mode, t)
    if args.reapply:
        save_image(synth_blur(u, k), args.reapply)
    return EXIT_OK


def cmd_blur(args):
    _need_file(args.input)
    _need_file(args.kernel)
    u = load_image(args.input)
    k, _, _ = read_kernel(args.kernel)
    save_image(synth_blur(u, k, args.sigma, seed=args.seed, boundary=args.boundary), args.output, args.bit_depth)
    return EXIT_OK


def cmd_evaluate(args):
    _need_file(args.reference)
    _need_file(args.test)
    ref = load_image(args.reference)
    test = load_image(args.test)
    if ref.shape != test.shape:
        raise UsageError(f"images differ in size: {ref.shape[:2]} vs {test.shape[:2]}")
    emap = scielab_map(ref, test, args.ppd, args.threshold)
    report = {
        "psnr": psnr(ref, test),
        "ssim": ssim(ref, test),
        "ciede2000": mean_ciede2000(ref, test),
        "scielab": {"sum": emap.total, "exceed_count": emap.exceed_count, "mean": emap.mean_de},
    }
    text = json.dumps(report, indent=2)
    print(text)
    if args.json_out:
        with open(args.json_out, "w", encoding="utf-8") as fh:
            fh.write(text + "\n")
    if args.map:
        save_image(error_map_image(test, emap), args.map)
    return EXIT_OK


def _diverging(x):
    """Map ``x`` in [-1, 1] to RGB: blue at -1, mid-gray at 0, red at +1."""
    gray = np.array([0.5, 0.5, 0.5])
    red = np.array([1.0, 0.0, 0.0])
    blue = np.array([0.0, 0.0, 1.0])
    x = np.clip(x, -1.0, 1.0)[..., None]
    return np.where(x >= 0, gray + x * (red - gray), gray - x * (blue - gray))


def render_kernel(k, scale=16, gap=None):
    """RGB image of the four components in a row; returns floats in [0, 1]."""
    gap = max(1, scale // 4) if gap is None else gap
    tiles = []
    q0 = k.data[0]
    peak = np.abs(q0).max()
    g = np.clip(q0 / peak, 0.0, 1.0) if peak > 0 else np.zeros_like(q0)
    tiles.append(np.repeat(g[..., None], 3, axis=-1))
    for c in (1, 2, 3):
        comp = k.data[c]
        m = np.abs(comp).max()
        tiles.append(_diverging(comp / m if m > 0 else np.zeros_like(comp)))
    s = k.size * scale
    out = np.ones((s, 4 * s + 3 * gap, 3))
    for i, tile in enumerate(tiles):
        big = np.kron(tile, np.ones((scale, scale, 1)))
        out[:, i * (s + gap):i * (s + gap) + s] = big
    return out


def cmd_kernel_view(args):
    _need_file(args.kernel)
    k, _, _ = read_kernel(args.kernel)
    save_image(render_kernel(k, args.scale), args.output)
    return EXIT_OK


COMMANDS = {
    "deblur": cmd_deblur,
    "estimate-kernel": cmd_estimate_kernel,
    "blur": cmd_blur,
    "evaluate": cmd_evaluate,
    "kernel-view": cmd_kernel_view,
}


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2), format="%(levelname)s %(message)s")
    cv2.setNumThreads(1)
    try:
        return COMMANDS[args.command](args)
    except NumericalError as exc:
        print(f"qdeblur: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (FileNotFoundError, ValueError, OSError) as exc:
        print(f"qdeblur: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
