"""``ghostsim`` command-line entry point.

    ghostsim <mode> --config PATH [--seed N] [--shots N] [--threads N] [--out DIR]
    ghostsim rerun --config OUT/manifest.json [--out DIR]

Exit codes: 0 success, 2 config error, 3 numerical or sampling-guard error,
4 insufficient data.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import io
from .analysis import fwhm
from .config import MODES, RunConfig, parse_config
from .correlation import (
    ObjectSpec,
    cgi_expected_image,
    coincidence_kernel,
    ensemble_image,
    eq1_bruteforce,
    eq1_factored,
    image_term,
    klyshko_psf,
)
from .errors import ConfigError, GhostsimError
from .objects import load_object
from .optics import PlaneGrid, propagator_from_matrix
from .photon import PhotonRunConfig, image_from_histogram, joint_table, sample_pairs, single_photon_cgi, tv_distance
from .sources import read_pattern_library, sample_realization, write_pattern_library

log = logging.getLogger("ghostsim")


def _random_instance(rng: np.random.Generator, max_size: int):
    n_s, n_x, n_y = (int(v) for v in rng.integers(1, max_size + 1, size=3))
    src, gx, gy = PlaneGrid(n_s, 1.0), PlaneGrid(n_x, 1.0), PlaneGrid(n_y, 1.0)

    def cmat(r, c):
        return rng.standard_normal((r, c)) + 1j * rng.standard_normal((r, c))

    g_obj = propagator_from_matrix(cmat(n_x, n_s), src, gx)
    g_ccd = propagator_from_matrix(cmat(n_y, n_s), src, gy)
    t = rng.random(n_x) * np.exp(2j * np.pi * rng.random(n_x))
    return g_obj, g_ccd, ObjectSpec(gx, t)


def _run_verify_eq1(cfg: RunConfig, out: Path):
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(cfg.seed)))
    rows = []
    worst = 0.0
    for k in range(cfg.instances):
        g_obj, g_ccd, obj = _random_instance(rng, cfg.max_size)
        err = 0.0
        for y in range(g_ccd.dst.n_points):
            brute = eq1_bruteforce(g_obj, g_ccd, obj, y)
            fact = eq1_factored(g_obj, g_ccd, obj, y)
            err = max(err, abs(brute - fact) / max(abs(brute), np.finfo(float).tiny))
        worst = max(worst, err)
        rows.append((k, g_obj.src.n_points, g_obj.dst.n_points, g_ccd.dst.n_points, err))
    table = io.write_csv(out / "eq1_instances.csv", ("instance", "n_s", "n_x", "n_y", "max_rel_error"), rows)
    report = {
        "instances": cfg.instances,
        "max_relative_error": worst,
        "tolerance": cfg.tolerance,
        "passed": worst <= cfg.tolerance,
    }
    path = out / "eq1_report.json"
    path.write_text(json.dumps(report, indent=2) + "\n")
    if not report["passed"]:
        raise _VerifyFailed(f"two-photon identity violated: max relative error {worst:.3e} > {cfg.tolerance:.1e}")
    return [table, path], report


class _VerifyFailed(GhostsimError):
    exit_code = 3


def _run_psf(cfg: RunConfig, out: Path):
    geo = cfg.geometry
    g_obj, g_ccd = geo.object_propagator(), geo.ccd_propagator()
    y = geo.ccd_grid.coordinates
    scale = geo.wavelength * geo.z_ccd / geo.source_grid.width
    rows = []
    for x in range(geo.object_grid.n_points):
        psf = np.abs(klyshko_psf(g_obj, g_ccd, x).amplitudes) ** 2
        rows.append((x, geo.object_grid.coordinates[x], int(np.argmax(psf)), fwhm(psf, y), scale))
    table = io.write_csv(out / "psf.csv",
                         ("x_index", "x_coordinate_m", "argmax_y", "fwhm_m", "diffraction_scale_m"), rows)
    kernel = io.write_pgm(out / "kernel.pgm", coincidence_kernel(g_obj, g_ccd),
                          quantity="|sum_j G[x,j] conj(g[y,j])|^2, rows x, cols y")
    return [table, kernel], {"symmetric": geo.symmetric_arms, "diffraction_scale_m": scale}


def _object(cfg: RunConfig) -> ObjectSpec:
    return load_object(cfg.object, cfg.geometry.object_grid, base_dir=cfg.base_dir)


def _run_pgi(cfg: RunConfig, out: Path):
    geo = cfg.geometry
    result = ensemble_image(cfg.source, cfg.seed, cfg.shots, geo.object_propagator(),
                            geo.ccd_propagator(), _object(cfg), threads=cfg.threads)
    return [io.write_image_csv(out / "image.csv", result)], {"shots": result.shots}


def _run_cgi(cfg: RunConfig, out: Path):
    geo = cfg.geometry
    g_obj, g_ccd, obj = geo.object_propagator(), geo.ccd_propagator(), _object(cfg)
    artifacts = []
    if cfg.patterns is not None:
        model, patterns, _ = read_pattern_library(cfg.patterns)
        if model.grid != geo.source_grid:
            raise ConfigError(f"pattern library grid {model.grid} does not match the source grid")
        result = cgi_expected_image(patterns, g_obj, g_ccd, obj)
    else:
        result = ensemble_image(cfg.source, cfg.seed, cfg.shots, g_obj, g_ccd, obj, threads=cfg.threads)
        if cfg.export_patterns:
            lib = write_pattern_library(
                out / "patterns.bin", cfg.source,
                (sample_realization(cfg.source, cfg.seed, r) for r in range(cfg.shots)), seed=cfg.seed)
            artifacts.append(lib)
    artifacts.insert(0, io.write_image_csv(out / "image.csv", result))
    return artifacts, {"shots": result.shots}


def _run_cgi_photon(cfg: RunConfig, out: Path):
    geo = cfg.geometry
    run = PhotonRunConfig(cfg.shots, cfg.mu, cfg.seed)
    result = single_photon_cgi(cfg.source, geo.object_propagator(), geo.ccd_propagator(), _object(cfg), run,
                               threads=cfg.threads)
    return [io.write_image_csv(out / "image.csv", result)], {"shots": result.shots,
                                                              "click_rate": result.mean_bucket}


def _run_pair_mc(cfg: RunConfig, out: Path):
    geo = cfg.geometry
    g_obj, g_ccd, obj = geo.object_propagator(), geo.ccd_propagator(), _object(cfg)
    table = joint_table(g_obj, g_ccd, obj)
    hist = sample_pairs(table, cfg.pairs, cfg.seed, shards=cfg.shards, threads=cfg.threads)
    img = image_from_histogram(hist, table)
    analytic = image_term(g_obj, g_ccd, obj)
    h_csv = io.write_histogram_csv(out / "histogram.csv", hist)
    i_csv = io.write_csv(out / "pair_image.csv", ("y_coordinate_m", "image", "analytic"),
                         zip(img.grid.coordinates, img.image, analytic))
    return [h_csv, i_csv], {"pairs": hist.total, "tv_distance": tv_distance(hist.counts, table.probs)}


_DISPATCH = {
    "pgi": _run_pgi,
    "cgi": _run_cgi,
    "cgi-photon": _run_cgi_photon,
    "pair-mc": _run_pair_mc,
    "verify-eq1": _run_verify_eq1,
    "psf": _run_psf,
}


def run(cfg: RunConfig) -> int:
    """Execute one configured run; artifacts and ``manifest.json`` go to ``cfg.output_dir``."""
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    log.info("mode=%s seed=%d output=%s", cfg.mode, cfg.seed, out)
    try:
        artifacts, results = _DISPATCH[cfg.mode](cfg, out)
    except _VerifyFailed:
        artifacts = [p for p in (out / "eq1_instances.csv", out / "eq1_report.json") if p.exists()]
        io.write_manifest(out, cfg.mode, cfg.to_dict(), cfg.geometry.to_dict(), artifacts)
        raise
    io.write_manifest(out, cfg.mode, cfg.to_dict(), cfg.geometry.to_dict(), artifacts, results)
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="ghostsim", description="1-D ghost imaging simulator")
    p.add_argument("mode", choices=[*MODES, "rerun"],
                   help="simulation mode, or 'rerun' to repeat a run from its manifest")
    p.add_argument("--config", required=True, help="JSON config file or run manifest")
    p.add_argument("--seed", type=int)
    p.add_argument("--shots", type=int)
    p.add_argument("--threads", type=int, help="worker threads (default: logical CPUs)")
    p.add_argument("--out", help="output directory")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(name)s: %(message)s")
    overrides = {"seed": args.seed, "shots": args.shots, "threads": args.threads, "output_dir": args.out}
    if args.mode != "rerun":
        overrides["mode"] = args.mode
    try:
        cfg = parse_config(args.config, overrides)
        return run(cfg)
    except GhostsimError as exc:
        print(f"ghostsim: error: {exc}", file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
