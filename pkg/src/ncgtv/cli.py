"""``ncgtv`` command line: denoise, certify, synth, bench, gridsearch.

Configuration precedence is CLI flags over a JSON config file (--config)
over built-in defaults.  Every stochastic step requires an explicit --seed;
given identical flags and seeds, outputs are byte-identical (pass
--no-timing to zero the wall-clock column of CSV reports).

Exit codes: 0 success, 1 usage, 2 I/O failure, 3 solver failure.
"""

import argparse
import json
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from .certify import certify
from .graph import load_graph, load_signal, save_signal
from .imaging import (
    FeatureConfig,
    Image,
    ImageFormatError,
    add_awgn,
    denoise_image,
    grid_graph,
    load_image,
    psnr,
    save_image,
    ssim,
    synth_blocks,
    synth_pwc,
    worker_count,
)
from .solver import CGError, SolverConfig

SCHEMA_VERSION = 1
EXIT_OK, EXIT_USAGE, EXIT_IO, EXIT_SOLVER = 0, 1, 2, 3

METRICS_HEADER = "schema_version,image,sigma,method,psnr,ssim,seconds"
CERTIFY_HEADER = "schema_version,mu,a_l,a_u,a_star,bound,capped,infeasible"
GRID_HEADER = "schema_version,image,sigma,method,mu,rho,psnr,ssim,seconds"
DIAG_HEADER = "schema_version,tile,channel,iteration,primal_residual,dual_residual,a_star,objective"

_DEFAULTS = {
    "mu": 0.15,
    "rho": 1.0,
    "gamma": None,
    "lam": None,
    "eps": 1e-6,
    "a_max": 1e4,
    "a_floor": 1e-3,
    "delta": 1e-3,
    "cg_tol": 1e-8,
    "cg_max_iter": 2000,
    "pgd_iters": 3,
    "outer_max_iter": 50,
    "primal_tol": 1e-5,
    "dual_tol": 1e-5,
    "refresh": True,
    "patch": 36,
    "radius": 1,
    "metric": (8.0, 1.0, 1.0),
    "color_graph": "luminance",
    "sigma": 0.0,
    "seed": None,
    "timing": True,
    "report": None,
}


class UsageError(Exception):
    pass


class IOFailure(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    """argparse, but usage problems exit with code 1 instead of 2."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _parse_metric(text):
    parts = [p for p in str(text).replace(",", " ").split() if p]
    if len(parts) != 3:
        raise UsageError("--metric needs 3 comma-separated weights")
    return tuple(float(p) for p in parts)


def _parse_floats(text, flag):
    try:
        vals = [float(p) for p in str(text).replace(",", " ").split() if p]
    except ValueError as exc:
        raise UsageError(f"{flag}: {exc}") from exc
    if not vals:
        raise UsageError(f"{flag} needs at least one value")
    return vals


def _add_common_flags(p):
    p.add_argument("--mu", type=float, help="regularizer weight")
    p.add_argument("--rho", type=float, help="ADMM penalty parameter")
    p.add_argument("--gamma", type=float, help="PGD step size (default 1/rho)")
    p.add_argument("--lambda", dest="lam", type=float, help="proximal parameter (default 1/rho)")
    p.add_argument("--eps", type=float, help="numerical-stability epsilon")
    p.add_argument("--a-max", dest="a_max", type=float, help="MC parameter cap")
    p.add_argument("--a-floor", dest="a_floor", type=float, help="MC parameter floor")
    p.add_argument("--delta", type=float, help="certificate safety factor")
    p.add_argument("--cg-tol", dest="cg_tol", type=float)
    p.add_argument("--cg-max-iter", dest="cg_max_iter", type=int)
    p.add_argument("--pgd-iters", dest="pgd_iters", type=int)
    p.add_argument("--outer-max-iter", dest="outer_max_iter", type=int)
    p.add_argument("--primal-tol", dest="primal_tol", type=float)
    p.add_argument("--dual-tol", dest="dual_tol", type=float)
    p.add_argument("--refresh", dest="refresh", action=argparse.BooleanOptionalAction,
                   default=None, help="re-certify the penalty graph every outer iteration")
    p.add_argument("--patch", type=int, help="tile size for image denoising")
    p.add_argument("--radius", type=int, help="grid-graph window radius")
    p.add_argument("--metric", type=str, help="intensity,row,col metric weights, e.g. 8,1,1")
    p.add_argument("--color-graph", dest="color_graph", choices=("luminance", "per-channel"))
    p.add_argument("--seed", type=int, help="RNG seed (required for any noise synthesis)")
    p.add_argument("--config", type=str, help="JSON config file (flags take precedence)")
    p.add_argument("--report", type=str, help="CSV report path")
    p.add_argument("--timing", dest="timing", action=argparse.BooleanOptionalAction,
                   default=None, help="report wall-clock seconds (--no-timing zeroes them)")


def _merged_options(args):
    """Defaults, overridden by the JSON config, overridden by explicit flags."""
    merged = dict(_DEFAULTS)
    cfg_path = getattr(args, "config", None)
    if cfg_path:
        try:
            with open(cfg_path) as fh:
                loaded = json.load(fh)
        except OSError as exc:
            raise IOFailure(f"cannot read config: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise UsageError(f"malformed config {cfg_path}: {exc}") from exc
        if not isinstance(loaded, dict):
            raise UsageError(f"config {cfg_path} must hold a JSON object")
        for key, val in loaded.items():
            key = {"lambda": "lam"}.get(key, key)
            if key not in _DEFAULTS:
                raise UsageError(f"unknown config key {key!r}")
            merged[key] = tuple(val) if key == "metric" and val is not None else val
    for key in _DEFAULTS:
        val = getattr(args, key, None)
        if val is not None:
            merged[key] = val
    if isinstance(merged["metric"], str):
        merged["metric"] = _parse_metric(merged["metric"])
    return merged


def _solver_config(m):
    return SolverConfig(
        mu=m["mu"], rho=m["rho"], gamma=m["gamma"], lam=m["lam"], eps=m["eps"],
        a_max=m["a_max"], a_floor=m["a_floor"], delta=m["delta"],
        cg_tol=m["cg_tol"], cg_max_iter=m["cg_max_iter"],
        pgd_inner_iters=m["pgd_iters"], outer_max_iter=m["outer_max_iter"],
        primal_tol=m["primal_tol"], dual_tol=m["dual_tol"],
        refresh_penalty_each_outer=m["refresh"],
    )


def _feature_config(m):
    return FeatureConfig(m["radius"], tuple(float(v) for v in m["metric"]))


def _read_image(path):
    try:
        return load_image(path)
    except (OSError, ImageFormatError) as exc:
        raise IOFailure(f"{path}: {exc}") from exc


def _write_image(img, path):
    try:
        save_image(img, path)
    except (OSError, ImageFormatError) as exc:
        raise IOFailure(f"{path}: {exc}") from exc


def _write_report(path, header, rows):
    try:
        with open(path, "w") as fh:
            fh.write(header + "\n")
            for row in rows:
                fh.write(row + "\n")
    except OSError as exc:
        raise IOFailure(f"{path}: {exc}") from exc


def _metric_pair(out_img, ref_img):
    p = psnr(out_img.clipped(), ref_img.clipped())
    try:
        s = ssim(out_img.clipped(), ref_img.clipped())
    except ValueError:
        s = float("nan")  # image smaller than the SSIM window
    return p, s


def _noise_seed(base, image_index, sigma_index):
    # per-(image, sigma) streams, deterministic in input order
    return base + 7919 * image_index + sigma_index


# ---------------------------------------------------------------------------
# subcommands

def _cmd_denoise(args):
    m = _merged_options(args)
    if m["sigma"] < 0:
        raise UsageError("--sigma must be nonnegative")
    if m["sigma"] > 0 and m["seed"] is None:
        raise UsageError("--seed is required when --sigma adds noise")
    ref = _read_image(args.input)
    noisy = add_awgn(ref, m["sigma"], m["seed"]) if m["sigma"] > 0 else ref
    scfg, fcfg = _solver_config(m), _feature_config(m)
    t0 = time.perf_counter()
    out, diags = denoise_image(
        noisy, args.method, scfg, fcfg, patch=m["patch"],
        color_graph=m["color_graph"], return_diagnostics=True,
    )
    seconds = time.perf_counter() - t0 if m["timing"] else 0.0
    _write_image(out, args.output)
    p, s = _metric_pair(out, ref)
    row = (f"{SCHEMA_VERSION},{Path(args.input).name},{m['sigma']:g},{args.method},"
           f"{p:.6f},{s:.6f},{seconds:.3f}")
    print(row)
    if m["report"]:
        _write_report(m["report"], METRICS_HEADER, [row])
    if args.diagnostics:
        rows = []
        for tile, ch, res in diags:
            if res is None:
                continue
            for it in range(res.outer_iters):
                rows.append(
                    f"{SCHEMA_VERSION},{tile},{ch},{it},"
                    f"{res.primal_residuals[it]:.12g},{res.dual_residuals[it]:.12g},"
                    f"{res.a_star_history[it]:.12g},{res.objective_history[it]:.12g}"
                )
        _write_report(args.diagnostics, DIAG_HEADER, rows)
    return EXIT_OK


def _cmd_certify(args):
    m = _merged_options(args)
    scfg, fcfg = _solver_config(m), _feature_config(m)
    if args.input:
        img = _read_image(args.input)
        plane = img.luminance()
        g = grid_graph(plane, fcfg)
        x_ref = plane.ravel()
    elif args.graph:
        if not args.signal:
            raise UsageError("--graph needs --signal with the reference values")
        try:
            g = load_graph(args.graph)
            x_ref = load_signal(args.signal)
        except (OSError, ValueError) as exc:
            raise IOFailure(str(exc)) from exc
        if x_ref.size != g.num_nodes:
            raise UsageError("signal length does not match graph size")
    else:
        raise UsageError("certify needs --input IMAGE or --graph FILE --signal FILE")
    res = certify(g, x_ref, m["mu"], scfg)
    row = (f"{SCHEMA_VERSION},{m['mu']:.12g},{res.a_l:.12g},{res.a_u:.12g},"
           f"{res.a_star:.12g},{res.bound_at_a_star:.12g},"
           f"{int(res.capped)},{int(res.infeasible)}")
    print(row)
    if m["report"]:
        _write_report(m["report"], CERTIFY_HEADER, [row])
    return EXIT_OK


def _cmd_synth(args):
    if args.seed is None:
        raise UsageError("--seed is required for synthesis")
    if args.kind == "signal":
        x = synth_pwc(args.n, args.pieces, (args.amin, args.amax), args.seed)
        try:
            save_signal(x, args.output)
        except OSError as exc:
            raise IOFailure(str(exc)) from exc
    else:
        img = synth_blocks(args.width, args.height, args.pieces, args.pieces, args.seed)
        _write_image(img, args.output)
    return EXIT_OK


def _list_images(dir_path):
    root = Path(dir_path)
    if not root.is_dir():
        raise IOFailure(f"{dir_path}: not a directory")
    return sorted(
        p for p in root.iterdir() if p.suffix.lower() in (".pgm", ".ppm", ".png")
    )


def _cmd_bench(args):
    m = _merged_options(args)
    sigmas = _parse_floats(args.sigmas, "--sigmas")
    methods = [s for s in args.methods.replace(",", " ").split() if s]
    for meth in methods:
        if meth not in ("ncgtv", "gtv", "glr"):
            raise UsageError(f"unknown method {meth!r}")
    if any(s > 0 for s in sigmas) and m["seed"] is None:
        raise UsageError("--seed is required when benchmarking with noise")
    paths = _list_images(args.input_dir)
    images = []
    for p in paths:
        try:
            images.append((p.name, load_image(p)))
        except (OSError, ImageFormatError) as exc:
            print(f"warning: skipping {p}: {exc}", file=sys.stderr)
    if not images:
        raise IOFailure(f"no readable images in {args.input_dir}")
    scfg, fcfg = _solver_config(m), _feature_config(m)

    tasks = []
    for ii, (name, img) in enumerate(images):
        for si, sigma in enumerate(sigmas):
            noisy = (
                add_awgn(img, sigma, _noise_seed(m["seed"], ii, si))
                if sigma > 0 else img
            )
            for meth in methods:
                tasks.append((name, img, noisy, sigma, meth))

    def run(task):
        name, ref, noisy, sigma, meth = task
        t0 = time.perf_counter()
        out = denoise_image(noisy, meth, scfg, fcfg, patch=m["patch"],
                            color_graph=m["color_graph"])
        seconds = time.perf_counter() - t0 if m["timing"] else 0.0
        p, s = _metric_pair(out, ref)
        return f"{SCHEMA_VERSION},{name},{sigma:g},{meth},{p:.6f},{s:.6f},{seconds:.3f}", p

    with ThreadPoolExecutor(max_workers=worker_count()) as pool:
        outcomes = list(pool.map(run, tasks))  # buffered, input order
    rows = [row for row, _ in outcomes]
    print(METRICS_HEADER)
    for row in rows:
        print(row)
    if m["report"]:
        _write_report(m["report"], METRICS_HEADER, rows)
    if args.plot_data:
        by_method = {meth: {} for meth in methods}
        for (name, img, noisy, sigma, meth), (_, p) in zip(tasks, outcomes):
            by_method[meth].setdefault(sigma, []).append(p)
        for meth in methods:
            lines = ["# sigma mean_psnr"]
            for sigma in sigmas:
                lines.append(f"{sigma:g} {np.mean(by_method[meth][sigma]):.6f}")
            _write_report(f"{args.plot_data}_{meth}.dat", lines[0], lines[1:])
    return EXIT_OK


def _cmd_gridsearch(args):
    m = _merged_options(args)
    mu_grid = _parse_floats(args.mu_grid, "--mu-grid")
    rho_grid = _parse_floats(args.rho_grid, "--rho-grid") if args.rho_grid else [m["rho"]]
    sigma = m["sigma"]
    if sigma > 0 and m["seed"] is None:
        raise UsageError("--seed is required when --sigma adds noise")
    paths = _list_images(args.input_dir)
    images = []
    for p in paths:
        try:
            images.append((p.name, load_image(p)))
        except (OSError, ImageFormatError) as exc:
            print(f"warning: skipping {p}: {exc}", file=sys.stderr)
    if not images:
        raise IOFailure(f"no readable images in {args.input_dir}")
    fcfg = _feature_config(m)

    tasks = []
    for ii, (name, img) in enumerate(images):
        noisy = add_awgn(img, sigma, _noise_seed(m["seed"], ii, 0)) if sigma > 0 else img
        for mu in mu_grid:
            for rho in rho_grid:
                tasks.append((name, img, noisy, mu, rho))

    def run(task):
        name, ref, noisy, mu, rho = task
        opts = dict(m, mu=mu, rho=rho, gamma=None, lam=None)
        scfg = _solver_config(opts)
        t0 = time.perf_counter()
        out = denoise_image(noisy, args.method, scfg, fcfg, patch=m["patch"],
                            color_graph=m["color_graph"])
        seconds = time.perf_counter() - t0 if m["timing"] else 0.0
        p, s = _metric_pair(out, ref)
        row = (f"{SCHEMA_VERSION},{name},{sigma:g},{args.method},{mu:g},{rho:g},"
               f"{p:.6f},{s:.6f},{seconds:.3f}")
        return row, p

    with ThreadPoolExecutor(max_workers=worker_count()) as pool:
        outcomes = list(pool.map(run, tasks))
    rows = [row for row, _ in outcomes]
    print(GRID_HEADER)
    for row in rows:
        print(row)
    # argmax over the grid by mean PSNR across images
    scores = {}
    for (name, img, noisy, mu, rho), (_, p) in zip(tasks, outcomes):
        scores.setdefault((mu, rho), []).append(p)
    best = max(scores, key=lambda k: float(np.mean(scores[k])))
    print(f"best: mu={best[0]:g} rho={best[1]:g} mean_psnr={np.mean(scores[best]):.6f}")
    if m["report"]:
        _write_report(m["report"], GRID_HEADER, rows)
    return EXIT_OK


def build_parser():
    parser = _Parser(prog="ncgtv", description=__doc__,
                     formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("denoise", help="denoise one image and report metrics")
    p.add_argument("--input", required=True)
    p.add_argument("--output", required=True)
    p.add_argument("--method", required=True, choices=("ncgtv", "gtv", "glr"))
    p.add_argument("--sigma", type=float, help="AWGN sigma on the 0-255 scale")
    p.add_argument("--diagnostics", type=str, help="write per-iteration solver CSV here")
    _add_common_flags(p)
    p.set_defaults(func=_cmd_denoise)

    p = sub.add_parser("certify", help="print the certified MC parameter")
    p.add_argument("--input", help="image input (graph from its luminance)")
    p.add_argument("--graph", help="graph file ('N M' header, one 'i j w' line per edge)")
    p.add_argument("--signal", help="reference signal file (one value per line)")
    _add_common_flags(p)
    p.set_defaults(func=_cmd_certify)

    p = sub.add_parser("synth", help="generate synthetic piecewise-constant inputs")
    p.add_argument("--kind", required=True, choices=("signal", "image"))
    p.add_argument("--output", required=True)
    p.add_argument("--n", type=int, default=256, help="signal length")
    p.add_argument("--pieces", type=int, default=6)
    p.add_argument("--amin", type=float, default=0.0)
    p.add_argument("--amax", type=float, default=1.0)
    p.add_argument("--width", type=int, default=96)
    p.add_argument("--height", type=int, default=96)
    p.add_argument("--seed", type=int)
    p.set_defaults(func=_cmd_synth)

    p = sub.add_parser("bench", help="benchmark methods over an image directory")
    p.add_argument("--input-dir", dest="input_dir", required=True)
    p.add_argument("--sigmas", default="30", help="comma-separated sigma list")
    p.add_argument("--methods", default="ncgtv,gtv,glr")
    p.add_argument("--plot-data", dest="plot_data", help="prefix for gnuplot .dat files")
    _add_common_flags(p)
    p.set_defaults(func=_cmd_bench)

    p = sub.add_parser("gridsearch", help="grid search mu (and rho) for best PSNR")
    p.add_argument("--input-dir", dest="input_dir", required=True)
    p.add_argument("--method", default="ncgtv", choices=("ncgtv", "gtv", "glr"))
    p.add_argument("--sigma", type=float, help="AWGN sigma on the 0-255 scale")
    p.add_argument("--mu-grid", dest="mu_grid", default="0.05,0.1,0.15,0.25,0.4")
    p.add_argument("--rho-grid", dest="rho_grid", default=None)
    _add_common_flags(p)
    p.set_defaults(func=_cmd_gridsearch)

    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"ncgtv: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except IOFailure as exc:
        print(f"ncgtv: i/o error: {exc}", file=sys.stderr)
        return EXIT_IO
    except CGError as exc:
        print(f"ncgtv: solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
