"""Command-line interface: train, sr, eval, bench, sweep, inspect.

Exit codes: 0 success, 2 config/usage/data error, 3 training divergence,
4 corrupt model file.
"""

import argparse
import csv
import dataclasses
import itertools
import logging
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from .hartley import dht2
from .imaging import (bicubic_resize, make_pair, modcrop, psnr, read_image,
                      rgb_to_ycbcr, ssim, super_resolve_tiled, to_luma, write_png,
                      ycbcr_to_rgb)
from .io import (ConfigError, ModelFile, ModelFormatError, load_config, load_model,
                 save_model, write_matrix_csv)
from .network import forward, init_params
from .training import TrainingDivergenceError, evaluate_loss, frequency_distance, train

logger = logging.getLogger("hartleysr")

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_DIVERGED = 3
EXIT_CORRUPT = 4

IMAGE_EXTENSIONS = (".png", ".ppm", ".pgm", ".pnm")


class UsageError(Exception):
    pass


def _threads():
    try:
        return max(1, int(os.environ.get("HSRN_THREADS", "1")))
    except ValueError:
        return 1


def list_images(directory):
    if not os.path.isdir(directory):
        raise UsageError(f"dataset directory not found: {directory}")
    names = sorted(n for n in os.listdir(directory) if n.lower().endswith(IMAGE_EXTENSIONS))
    return [os.path.join(directory, n) for n in names]


def _load_samples(directory, cfg):
    samples = []
    for path in list_images(directory):
        try:
            samples.append(make_pair(read_image(path), cfg.upscale, (cfg.height, cfg.width)))
        except (OSError, ValueError) as exc:
            logger.warning("skipping %s: %s", path, exc)
    return samples


def cmd_train(args):
    cfg = load_config(args.config)
    dataset_dir = cfg.path("dataset_dir")
    samples = _load_samples(dataset_dir, cfg)
    if not samples:
        raise UsageError(f"no usable images in dataset directory: {dataset_dir}")
    validation = None
    if cfg.validation_dir:
        validation = _load_samples(cfg.path("validation_dir"), cfg) or None
    logger.info("training on %d samples", len(samples))

    arch = cfg.arch
    tcfg = cfg.training_config()

    def wrap(params):
        return ModelFile(params, cfg.upscale, tcfg.loss_kind, cfg.tie_symmetric_weights)

    def checkpoint(iteration, params):
        save_model(cfg.path("checkpoint_path"), wrap(params))
        logger.info("checkpoint at iteration %d", iteration)

    with open(cfg.path("loss_csv"), "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["iter", "loss", "elapsed_ms"])

        def log_row(iteration, loss, elapsed_ms):
            writer.writerow([iteration, repr(loss), f"{elapsed_ms:.3f}"])

        params = init_params(arch, seed=tcfg.seed, tie_symmetric_weights=tcfg.tie_symmetric_weights)
        try:
            params = train(samples, arch, tcfg, callbacks=[log_row], params=params,
                           checkpoint=checkpoint, checkpoint_every=cfg.checkpoint_every,
                           validation=validation, validate_every=cfg.validate_every)
        except TrainingDivergenceError as exc:
            logger.error("training diverged at iteration %s: %s", exc.iteration, exc)
            if exc.last_good is not None:
                checkpoint(exc.iteration, exc.last_good)
            return EXIT_DIVERGED
    save_model(cfg.path("model_out"), wrap(params))
    print(f"wrote {cfg.path('model_out')}")
    return EXIT_OK


def _read_input(path):
    try:
        return read_image(path)
    except (OSError, ValueError) as exc:
        raise UsageError(f"cannot read image {path}: {exc}") from None


def _check_scale(model, scale):
    if scale is not None and scale != model.upscale:
        raise UsageError(f"model was trained for x{model.upscale}, requested x{scale}")


def _fit_overlap(model, overlap):
    limit = min(model.params.W_final.shape) // 2 - 1
    if overlap > limit:
        logger.warning("tile overlap %d too large for a %s network, using %d",
                       overlap, model.params.W_final.shape, limit)
        return limit
    if overlap < 0:
        raise UsageError("--tile-overlap must be >= 0")
    return overlap


def upscale_and_enhance(img, model, overlap):
    """Bicubic-upscale by the model factor and enhance the luma channel."""
    overlap = _fit_overlap(model, overlap)
    s = model.upscale
    rows, cols = img.shape[:2]
    if img.ndim == 3:
        ycc = bicubic_resize(rgb_to_ycbcr(img), rows * s, cols * s)
        y, timing = super_resolve_tiled(ycc[..., 0], model.params, overlap, return_timing=True)
        ycc[..., 0] = y
        return np.clip(ycbcr_to_rgb(ycc), 0.0, 1.0), timing
    up = bicubic_resize(img, rows * s, cols * s)
    return super_resolve_tiled(up, model.params, overlap, return_timing=True)


def cmd_sr(args):
    model = load_model(args.model)
    _check_scale(model, args.scale)
    img = _read_input(args.input)
    out, timing = upscale_and_enhance(img, model, args.tile_overlap)
    write_png(args.output, out)
    for key in ("transform_ms", "net_ms", "inverse_ms", "total_ms"):
        print(f"{key}: {timing[key]:.3f}")
    return EXIT_OK


EVAL_COLUMNS = ["name", "psnr_bicubic", "psnr_model", "ssim_bicubic", "ssim_model", "ms"]


def evaluate_image(path, model, scale, shave, overlap):
    hr = modcrop(to_luma(read_image(path)), scale)
    rows, cols = hr.shape
    lr = bicubic_resize(hr, rows // scale, cols // scale)
    bic = bicubic_resize(lr, rows, cols)
    t0 = time.perf_counter()
    out = super_resolve_tiled(bic, model.params, overlap)
    ms = (time.perf_counter() - t0) * 1e3
    return {
        "psnr_bicubic": psnr(bic, hr, shave=shave),
        "psnr_model": psnr(out, hr, shave=shave),
        "ssim_bicubic": ssim(bic, hr, shave=shave),
        "ssim_model": ssim(out, hr, shave=shave),
        "ms": ms,
    }


def cmd_eval(args):
    model = load_model(args.model)
    _check_scale(model, args.scale)
    scale = model.upscale
    overlap = _fit_overlap(model, args.tile_overlap)
    paths = list_images(args.dataset)
    if not paths:
        raise UsageError(f"no images in {args.dataset}")

    def run(path):
        try:
            return evaluate_image(path, model, scale, args.shave, overlap)
        except (OSError, ValueError) as exc:
            logger.warning("skip %s: %s", path, exc)
            return None

    with ThreadPoolExecutor(max_workers=_threads()) as pool:
        results = list(pool.map(run, paths))

    out = open(args.out, "w", newline="") if args.out else sys.stdout
    try:
        writer = csv.writer(out)
        writer.writerow(EVAL_COLUMNS)
        good = []
        for path, res in zip(paths, results):
            name = os.path.basename(path)
            if res is None:
                writer.writerow([name, "skip", "skip", "skip", "skip", "skip"])
                continue
            good.append(res)
            writer.writerow([name] + [repr(float(res[c])) for c in EVAL_COLUMNS[1:]])
        if good:
            means = [float(np.mean([r[c] for r in good])) for c in EVAL_COLUMNS[1:]]
            writer.writerow(["mean"] + [repr(m) for m in means])
    finally:
        if args.out:
            out.close()
    if not good:
        logger.error("all images skipped")
        return EXIT_USAGE
    return EXIT_OK


BENCH_COLUMNS = ["size", "stat", "transform_ms", "net_ms", "inverse_ms", "total_ms"]


def bench_sizes(model, sizes, repeats, overlap=0, seed=0):
    """Per-size median and mean stage timings of the tiled pipeline."""
    rows = []
    rng = np.random.default_rng(seed)
    keys = BENCH_COLUMNS[2:]
    for size in sizes:
        if size < max(model.params.W_final.shape):
            raise UsageError(f"size {size} smaller than the network")
        plane = rng.uniform(0.0, 1.0, size=(size, size))
        runs = []
        for _ in range(repeats):
            _, timing = super_resolve_tiled(plane, model.params, overlap, return_timing=True)
            runs.append([timing[k] for k in keys])
        runs = np.array(runs)
        rows.append([size, "median"] + list(np.median(runs, axis=0)))
        rows.append([size, "mean"] + list(np.mean(runs, axis=0)))
    return rows


def cmd_bench(args):
    model = load_model(args.model)
    sizes = [int(s) for s in args.sizes.split(",") if s.strip()]
    if args.repeats < 1:
        raise UsageError("--repeats must be >= 1")
    rows = bench_sizes(model, sizes, args.repeats, _fit_overlap(model, args.tile_overlap))
    out = open(args.out, "w", newline="") if args.out else sys.stdout
    try:
        writer = csv.writer(out)
        writer.writerow(BENCH_COLUMNS)
        for row in rows:
            writer.writerow(row[:2] + [f"{v:.4f}" for v in row[2:]])
    finally:
        if args.out:
            out.close()
    return EXIT_OK


SWEEP_COLUMNS = ["num_layers", "kernels_per_layer", "half_width", "val_loss",
                 "psnr_bicubic", "psnr_model", "train_ms"]


def _int_list(text):
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise UsageError(f"expected comma-separated integers, got {text!r}") from None


def _mean_psnr(samples, params=None):
    values = []
    for s in samples:
        hr = dht2(s.target_freq)
        if params is None:
            out = dht2(s.input_freq)
        else:
            out = np.clip(dht2(forward(s.input_freq, params)[0]), 0.0, 1.0)
        values.append(psnr(out, hr))
    return float(np.mean(values))


def cmd_sweep(args):
    """Grid search over (L, K, N), scored on the config's validation images."""
    cfg = load_config(args.config)
    if not cfg.validation_dir:
        raise UsageError("sweep needs validation_dir in the config")
    grid = list(itertools.product(
        _int_list(args.layers) if args.layers else [cfg.num_layers],
        _int_list(args.kernels) if args.kernels else [cfg.kernels_per_layer],
        _int_list(args.half_widths) if args.half_widths else [cfg.half_width],
    ))
    samples = _load_samples(cfg.path("dataset_dir"), cfg)
    validation = _load_samples(cfg.path("validation_dir"), cfg)
    if not samples or not validation:
        raise UsageError("sweep needs usable training and validation images")
    baseline = _mean_psnr(validation)

    out = open(args.out, "w", newline="") if args.out else sys.stdout
    try:
        writer = csv.writer(out)
        writer.writerow(SWEEP_COLUMNS)
        for L, K, N in grid:
            try:
                run = dataclasses.replace(cfg, num_layers=L, kernels_per_layer=K, half_width=N)
                arch = run.arch
            except ValueError as exc:
                raise UsageError(f"invalid grid point L={L} K={K} N={N}: {exc}") from None
            tcfg = run.training_config()
            t0 = time.perf_counter()
            try:
                params = train(samples, arch, tcfg)
            except TrainingDivergenceError as exc:
                logger.error("L=%d K=%d N=%d diverged: %s", L, K, N, exc)
                return EXIT_DIVERGED
            ms = (time.perf_counter() - t0) * 1e3
            writer.writerow([L, K, N, repr(evaluate_loss(params, validation, tcfg)),
                             repr(baseline), repr(_mean_psnr(validation, params)), f"{ms:.1f}"])
    finally:
        if args.out:
            out.close()
    return EXIT_OK


def _normalize(x):
    lo, hi = float(np.min(x)), float(np.max(x))
    if hi == lo:
        return np.zeros_like(x)
    return (x - lo) / (hi - lo)


def _kernel_grid(kernels, zoom=8, gap=1):
    n = kernels.shape[-1] * zoom
    grid = np.ones((n, len(kernels) * (n + gap) - gap))
    for j, c in enumerate(kernels):
        grid[:, j * (n + gap): j * (n + gap) + n] = np.kron(_normalize(c), np.ones((zoom, zoom)))
    return grid


def high_frequency_fraction(freq_map):
    """Share of energy outside the quarter of coefficients nearest DC."""
    d = frequency_distance(freq_map.shape)
    near = d <= np.quantile(d, 0.25)
    energy = freq_map * freq_map
    total = energy.sum()
    return float(energy[~near].sum() / total) if total > 0 else 0.0


def _fit_to_network(plane, shape):
    rows, cols = shape
    if plane.shape[0] >= rows and plane.shape[1] >= cols:
        top, left = (plane.shape[0] - rows) // 2, (plane.shape[1] - cols) // 2
        return plane[top:top + rows, left:left + cols]
    return bicubic_resize(plane, rows, cols)


def cmd_inspect(args):
    model = load_model(args.model)
    params = model.params
    L = params.W.shape[0]
    if args.layer is not None and not 1 <= args.layer <= L:
        raise UsageError(f"layer {args.layer} out of range 1..{L}")
    layers = [args.layer] if args.layer is not None else list(range(1, L + 1))
    os.makedirs(args.dump_dir, exist_ok=True)

    for i in layers:
        kernels = params.C[i - 1]
        write_png(os.path.join(args.dump_dir, f"layer{i}_kernels.png"), _kernel_grid(kernels))
        for j, c in enumerate(kernels, start=1):
            write_matrix_csv(os.path.join(args.dump_dir, f"layer{i}_kernel{j}.csv"), c)

    if args.image:
        plane = _fit_to_network(to_luma(_read_input(args.image)), params.W_final.shape)
        _, trace = forward(dht2(plane), params)
        with open(os.path.join(args.dump_dir, "energy.csv"), "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["layer", "high_freq_fraction"])
            for i in layers:
                S = trace.S[i - 1]
                write_matrix_csv(os.path.join(args.dump_dir, f"layer{i}_feature.csv"), S)
                shown = np.fft.fftshift(np.log1p(np.abs(S)))
                write_png(os.path.join(args.dump_dir, f"layer{i}_feature.png"), _normalize(shown))
                frac = high_frequency_fraction(S)
                writer.writerow([i, repr(frac)])
                logger.info("layer %d: high-frequency energy fraction %.4f", i, frac)
    print(f"wrote dumps to {args.dump_dir}")
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(prog="hartleysr", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train a model from a config file")
    p.add_argument("config")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("sr", help="super-resolve one image")
    p.add_argument("model")
    p.add_argument("input")
    p.add_argument("output")
    p.add_argument("--tile-overlap", type=int, default=16)
    p.add_argument("--scale", type=int, default=None)
    p.set_defaults(func=cmd_sr)

    p = sub.add_parser("eval", help="PSNR/SSIM of model vs bicubic over a directory")
    p.add_argument("model")
    p.add_argument("dataset")
    p.add_argument("--scale", type=int, default=None)
    p.add_argument("--shave", type=int, default=0)
    p.add_argument("--tile-overlap", type=int, default=16)
    p.add_argument("--out", default=None, help="CSV path (default stdout)")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("bench", help="time the inference pipeline")
    p.add_argument("model")
    p.add_argument("--sizes", default="96,192,384,768")
    p.add_argument("--repeats", type=int, default=5)
    p.add_argument("--tile-overlap", type=int, default=0)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("sweep", help="cross-validate layers, kernels and kernel size")
    p.add_argument("config")
    p.add_argument("--layers", default=None, help="e.g. 2,4,6")
    p.add_argument("--kernels", default=None, help="e.g. 3,5")
    p.add_argument("--half-widths", default=None, help="e.g. 1,3,5")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("inspect", help="dump kernels and feature maps")
    p.add_argument("model")
    p.add_argument("--layer", type=int, default=None, help="1-based layer index")
    p.add_argument("--dump-dir", required=True)
    p.add_argument("--image", default=None, help="sample image for feature maps")
    p.set_defaults(func=cmd_inspect)
    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ModelFormatError as exc:
        print(f"corrupt model: {exc}", file=sys.stderr)
        return EXIT_CORRUPT
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
