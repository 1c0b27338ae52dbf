"""Command-line interface chaining the library stages through files.

Every stage reads and writes JSON artifacts, so a pipeline run is a sequence
of re-runnable commands:

    lanespace synth -o train.jsonl
    lanespace build-basis -d train.jsonl -o basis.json
    lanespace cluster -d train.jsonl -b basis.json -o candidates.json
    lanespace score-oracle -c candidates.json -b basis.json -d test.jsonl -o scores.jsonl
    lanespace detect -c candidates.json -b basis.json -s scores.jsonl -o detections.jsonl
    lanespace eval -p detections.jsonl -d test.jsonl -b basis.json

Flag defaults can be overridden by a versioned JSON config file (--config);
explicit flags always win over the config. LANESPACE_OUT_DIR, when set,
redirects relative output paths into that directory.
"""

from __future__ import annotations

import json
import os
import sys
from pathlib import Path

import click
import numpy as np

from . import __version__
from .candidates import ClusteringConfig, cluster_lanes, mean_best_iou, straight_anchor_grid
from .datasets import load_dataset, write_csv, write_tusimple_jsonl
from .eigenspace import LaneMatrix, build_basis
from .errors import LanespaceError, SchemaError, ValidationError, VersionError
from .geometry import SamplingGrid, stripe_iou, stripe_iou_pixelcount
from .metrics import f_measure, match_lanes, tusimple_score
from .oracle import OracleConfig, oracle_scores
from .pipeline import DetectionConfig, detect_image, uniform_height_grid
from .render import DEFAULT_COLORS, LaneLayer, render_svg
from .serialize import (
    load_basis,
    load_candidates,
    load_detections,
    load_image_scores,
    save_basis,
    save_candidates,
    save_detections,
    save_image_scores,
    save_match_report,
    save_point_accuracy_report,
)
from .synth import SyntheticSpec, generate_synthetic

CONFIG_SCHEMA_VERSION = 1

DEFAULTS = {
    "samples": 50,
    "rank": 6,
    "k": 1000,
    "t": 10,
    "iou_thresh": 0.5,
    "kappa": 0.3,
    "stripe_width": 30,
    "seed": 0,
    "format": "tusimple",
    "image_width": 1280,
    "image_height": 720,
    "heights": 25,
}


def _load_config(path) -> dict:
    if path is None:
        return {}
    try:
        obj = json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise SchemaError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise SchemaError(f"config {path}: invalid JSON ({exc.msg})") from exc
    if not isinstance(obj, dict):
        raise SchemaError("config must be a JSON object")
    version = obj.get("schema_version")
    if version != CONFIG_SCHEMA_VERSION:
        raise VersionError(f"config schema_version {version} unsupported")
    defaults = obj.get("defaults", {})
    unknown = set(defaults) - set(DEFAULTS)
    if unknown:
        raise SchemaError(f"config has unknown keys: {sorted(unknown)}")
    return defaults


def _resolve(flag_value, name, config):
    """Explicit flag > config file > built-in default."""
    if flag_value is not None:
        return flag_value
    if name in config:
        return config[name]
    return DEFAULTS[name]


def _out_path(path) -> Path:
    path = Path(path)
    out_dir = os.environ.get("LANESPACE_OUT_DIR")
    if out_dir and not path.is_absolute():
        path = Path(out_dir) / path
    path.parent.mkdir(parents=True, exist_ok=True)
    return path


def _grid_for(image_width, image_height, samples) -> SamplingGrid:
    return SamplingGrid.uniform(image_width, image_height, samples)


def _resampled_records(records, grid):
    return [(record, record.resampled(grid)) for record in records]


def _echo_kv(pairs):
    for key, value in pairs:
        click.echo(f"{key}: {value}")


class _Cli(click.Group):
    def invoke(self, ctx):
        try:
            return super().invoke(ctx)
        except ValidationError as exc:
            click.echo(f"error: {exc}", err=True)
            sys.exit(2)
        except LanespaceError as exc:
            click.echo(f"error: {exc}", err=True)
            sys.exit(1)


@click.group(cls=_Cli)
@click.version_option(version=__version__)
def main():
    """Low-rank lane descriptors: basis building, candidates, detection, eval."""


config_option = click.option(
    "--config", type=click.Path(), default=None, help="versioned JSON config file"
)
format_option = click.option(
    "--format", "fmt", type=click.Choice(["tusimple", "csv", "culane"]), default=None
)


@main.command()
@click.option("--count", type=int, default=200, show_default=True, help="number of images")
@click.option("--seed", type=int, default=None)
@click.option("--weights", default="1,1,1", show_default=True, help="straight,arc,s_curve mix")
@click.option("--curvature", default=None, help="min,max curvature in 1/pixels")
@click.option("--image-width", type=int, default=None)
@click.option("--image-height", type=int, default=None)
@click.option("--samples", type=int, default=None, help="grid rows per lane vector")
@click.option("-o", "--out", required=True, type=click.Path())
@config_option
@format_option
def synth(count, seed, weights, curvature, image_width, image_height, samples, out, config, fmt):
    """Generate a synthetic annotation file."""
    cfg = _load_config(config)
    seed = _resolve(seed, "seed", cfg)
    fmt = _resolve(fmt, "format", cfg)
    image_width = _resolve(image_width, "image_width", cfg)
    image_height = _resolve(image_height, "image_height", cfg)
    samples = _resolve(samples, "samples", cfg)
    try:
        mix = tuple(float(w) for w in weights.split(","))
    except ValueError as exc:
        raise SchemaError(f"bad --weights: {weights}") from exc
    kwargs = {}
    if curvature is not None:
        try:
            lo, hi = (float(c) for c in curvature.split(","))
        except ValueError as exc:
            raise SchemaError(f"bad --curvature: {curvature}") from exc
        kwargs["curvature_range"] = (lo, hi)
    spec = SyntheticSpec(
        count=count,
        seed=seed,
        image_size=(image_width, image_height),
        n_samples=samples,
        weights=mix,
        **kwargs,
    )
    records = generate_synthetic(spec)
    path = _out_path(out)
    if fmt == "csv":
        write_csv(records, path)
    elif fmt == "tusimple":
        write_tusimple_jsonl(records, path)
    else:
        raise SchemaError("synth can write tusimple or csv output")
    n_lanes = sum(len(r.lanes) for r in records)
    _echo_kv([("records", len(records)), ("lanes", n_lanes), ("out", path)])


@main.command("build-basis")
@click.option("-d", "--data", required=True, type=click.Path())
@click.option("--samples", type=int, default=None)
@click.option("--rank", type=int, default=None)
@click.option("--image-width", type=int, default=None)
@click.option("--image-height", type=int, default=None)
@click.option("-o", "--out", required=True, type=click.Path())
@config_option
@format_option
def build_basis_cmd(data, samples, rank, image_width, image_height, out, config, fmt):
    """Build the lane basis from a training annotation file."""
    cfg = _load_config(config)
    samples = _resolve(samples, "samples", cfg)
    rank = _resolve(rank, "rank", cfg)
    fmt = _resolve(fmt, "format", cfg)
    image_width = _resolve(image_width, "image_width", cfg)
    image_height = _resolve(image_height, "image_height", cfg)
    records = load_dataset(data, fmt, (image_width, image_height))
    grid = _grid_for(image_width, image_height, samples)
    lanes = [lane for record in records for lane in record.resampled(grid)]
    if not lanes:
        raise SchemaError("dataset contains no usable lanes")
    basis = build_basis(LaneMatrix.from_lanes(lanes), rank)
    path = _out_path(out)
    save_basis(basis, path)
    _echo_kv(
        [
            ("lanes", len(lanes)),
            ("rank", basis.m),
            ("numerical_rank", basis.rank),
            ("basis_id", basis.content_id),
            ("out", path),
        ]
    )


@main.command()
@click.option("-d", "--data", required=True, type=click.Path())
@click.option("-b", "--basis", "basis_path", required=True, type=click.Path())
@click.option("--ranks", default=None, help="comma list of ranks to report (default 1..m)")
@click.option("-o", "--out", type=click.Path(), default=None, help="JSON report path")
@config_option
@format_option
def approx(data, basis_path, ranks, out, config, fmt):
    """Report reconstruction error of the dataset for a range of ranks."""
    cfg = _load_config(config)
    fmt = _resolve(fmt, "format", cfg)
    basis = load_basis(basis_path)
    records = load_dataset(
        data, fmt, (basis.grid.image_width, basis.grid.image_height)
    )
    lanes = [lane for record in records for lane in record.resampled(basis.grid)]
    if not lanes:
        raise SchemaError("dataset contains no usable lanes")
    matrix = LaneMatrix.from_lanes(lanes)
    if ranks is None:
        rank_list = list(range(1, basis.m + 1))
    else:
        rank_list = [int(r) for r in ranks.split(",")]
        if any(r < 1 or r > basis.m for r in rank_list):
            raise SchemaError(f"ranks must lie in [1, {basis.m}]")
    rows = []
    for r in rank_list:
        u_r = basis.u[:, :r]
        residual = matrix.columns - u_r @ (u_r.T @ matrix.columns)
        total = float(np.sum(residual**2))
        per_lane_rms = float(
            np.mean(np.sqrt(np.sum(residual**2, axis=0) / matrix.grid.n_samples))
        )
        rows.append(
            {
                "rank": r,
                "residual_energy": total,
                "mean_rms_px": per_lane_rms,
            }
        )
        click.echo(f"rank {r}: residual {total:.4f}  mean-rms {per_lane_rms:.3f} px")
    if out is not None:
        path = _out_path(out)
        path.write_text(
            json.dumps(
                {
                    "schema_version": 1,
                    "kind": "approx_report",
                    "lanes": len(lanes),
                    "rows": rows,
                }
            )
            + "\n",
            encoding="utf-8",
        )
        click.echo(f"out: {path}")


@main.command()
@click.option("-d", "--data", required=True, type=click.Path())
@click.option("-b", "--basis", "basis_path", required=True, type=click.Path())
@click.option("--k", type=int, default=None)
@click.option("--seed", type=int, default=None)
@click.option("-o", "--out", required=True, type=click.Path())
@config_option
@format_option
def cluster(data, basis_path, k, seed, out, config, fmt):
    """Cluster training lanes in coefficient space into k candidates."""
    cfg = _load_config(config)
    k = _resolve(k, "k", cfg)
    seed = _resolve(seed, "seed", cfg)
    fmt = _resolve(fmt, "format", cfg)
    basis = load_basis(basis_path)
    records = load_dataset(
        data, fmt, (basis.grid.image_width, basis.grid.image_height)
    )
    lanes = [lane for record in records for lane in record.resampled(basis.grid)]
    candidates = cluster_lanes(basis, lanes, ClusteringConfig(k=k, seed=seed))
    path = _out_path(out)
    save_candidates(candidates, path)
    _echo_kv([("k", candidates.k), ("basis_id", candidates.basis_id), ("out", path)])


@main.command("straight-anchors")
@click.option("-b", "--basis", "basis_path", required=True, type=click.Path())
@click.option("--n", type=int, required=True)
@click.option("-o", "--out", required=True, type=click.Path())
@config_option
def straight_anchors(basis_path, n, out, config):
    """Emit n straight baseline anchors over a position x angle grid."""
    _load_config(config)
    basis = load_basis(basis_path)
    anchors = straight_anchor_grid(basis, n)
    path = _out_path(out)
    save_candidates(anchors, path)
    _echo_kv([("n", anchors.k), ("out", path)])


@main.command("eval-candidates")
@click.option("-c", "--candidates", "candidates_path", required=True, type=click.Path())
@click.option("-d", "--data", required=True, type=click.Path())
@click.option("--stripe-width", type=int, default=None)
@click.option("--iou-mode", type=click.Choice(["interval", "pixel"]), default="interval",
              show_default=True, help="pixel mode audits with materialized masks")
@config_option
@format_option
def eval_candidates(candidates_path, data, stripe_width, iou_mode, config, fmt):
    """Mean best-match IoU of a candidate set against a test dataset."""
    cfg = _load_config(config)
    stripe_width = _resolve(stripe_width, "stripe_width", cfg)
    fmt = _resolve(fmt, "format", cfg)
    candidates = load_candidates(candidates_path)
    grid = candidates.grid
    records = load_dataset(data, fmt, (grid.image_width, grid.image_height))
    test_lanes = [lane for record in records for lane in record.resampled(grid)]
    if iou_mode == "interval":
        score = mean_best_iou(candidates, test_lanes, stripe_width)
    else:
        iou_fn = stripe_iou_pixelcount
        best = [
            max(iou_fn(lane, cand, stripe_width) for cand in candidates.lanes)
            for lane in test_lanes
        ]
        score = float(np.mean(best))
    _echo_kv([("test_lanes", len(test_lanes)), ("mean_best_iou", f"{score:.6f}")])


@main.command("score-oracle")
@click.option("-c", "--candidates", "candidates_path", required=True, type=click.Path())
@click.option("-b", "--basis", "basis_path", required=True, type=click.Path())
@click.option("-d", "--data", required=True, type=click.Path())
@click.option("--heights", type=int, default=None, help="number of height bins")
@click.option("--noise-sigma", type=float, default=0.0, show_default=True)
@click.option("--iou-floor", type=float, default=OracleConfig.iou_floor, show_default=True)
@click.option("--seed", type=int, default=None)
@click.option("--stripe-width", type=int, default=None)
@click.option("-o", "--out", required=True, type=click.Path())
@config_option
@format_option
def score_oracle(candidates_path, basis_path, data, heights, noise_sigma, iou_floor,
                 seed, stripe_width, out, config, fmt):
    """Score candidates against ground truth (stand-in for a trained model)."""
    cfg = _load_config(config)
    heights = _resolve(heights, "heights", cfg)
    seed = _resolve(seed, "seed", cfg)
    stripe_width = _resolve(stripe_width, "stripe_width", cfg)
    fmt = _resolve(fmt, "format", cfg)
    basis = load_basis(basis_path)
    candidates = load_candidates(candidates_path)
    if candidates.basis_id != basis.content_id:
        raise SchemaError("candidates were built from a different basis")
    records = load_dataset(
        data, fmt, (basis.grid.image_width, basis.grid.image_height)
    )
    height_grid = uniform_height_grid(basis.grid, heights)
    oracle_cfg = OracleConfig(
        iou_floor=iou_floor, noise_sigma=noise_sigma, seed=seed, stripe_width=stripe_width
    )
    entries = []
    for record in records:
        gt = record.resampled(basis.grid)
        scores, features = oracle_scores(candidates, gt, basis, height_grid, oracle_cfg)
        entries.append((record.image_id, scores, features, height_grid))
    path = _out_path(out)
    save_image_scores(entries, path)
    _echo_kv([("images", len(entries)), ("out", path)])


@main.command()
@click.option("-c", "--candidates", "candidates_path", required=True, type=click.Path())
@click.option("-b", "--basis", "basis_path", required=True, type=click.Path())
@click.option("-s", "--scores", "scores_path", required=True, type=click.Path())
@click.option("--t", type=int, default=None)
@click.option("--iou-thresh", type=float, default=None)
@click.option("--kappa", type=float, default=None)
@click.option("--stripe-width", type=int, default=None)
@click.option("--min-prob", type=float, default=None,
              help="stop NMS below this probability (off by default)")
@click.option("--disable-offsets", is_flag=True, help="ablation: ignore offsets")
@click.option("--disable-heights", is_flag=True, help="ablation: ignore height bins")
@click.option("-o", "--out", required=True, type=click.Path())
@config_option
def detect(candidates_path, basis_path, scores_path, t, iou_thresh, kappa, stripe_width,
           min_prob, disable_offsets, disable_heights, out, config):
    """Run NMS, clique selection and refinement on scored candidates."""
    cfg = _load_config(config)
    t = _resolve(t, "t", cfg)
    iou_thresh = _resolve(iou_thresh, "iou_thresh", cfg)
    kappa = _resolve(kappa, "kappa", cfg)
    stripe_width = _resolve(stripe_width, "stripe_width", cfg)
    basis = load_basis(basis_path)
    candidates = load_candidates(candidates_path)
    if candidates.basis_id != basis.content_id:
        raise SchemaError("candidates were built from a different basis")
    detection_cfg = DetectionConfig(
        t=t,
        iou_threshold=iou_thresh,
        kappa=kappa,
        stripe_width=stripe_width,
        min_probability=min_prob,
        use_offsets=not disable_offsets,
        use_heights=not disable_heights,
    )
    entries = []
    for image_id, scores, features, height_grid in load_image_scores(scores_path):
        if scores.k != candidates.k:
            raise SchemaError(f"{image_id}: scores cover {scores.k} candidates, set has {candidates.k}")
        lanes, clique, _ = detect_image(
            basis, candidates, scores, features, height_grid, detection_cfg
        )
        entries.append((image_id, lanes, clique.compatibility))
    path = _out_path(out)
    save_detections(entries, path)
    _echo_kv([("images", len(entries)), ("out", path)])


@main.command("eval")
@click.option("-p", "--pred", "pred_path", required=True, type=click.Path())
@click.option("-d", "--data", required=True, type=click.Path())
@click.option("-b", "--basis", "basis_path", required=True, type=click.Path())
@click.option("--metric", type=click.Choice(["culane", "tusimple"]), default="culane",
              show_default=True)
@click.option("--iou-thresh", type=float, default=None)
@click.option("--stripe-width", type=int, default=None)
@click.option("-o", "--out", type=click.Path(), default=None, help="JSON report path")
@config_option
@format_option
def eval_cmd(pred_path, data, basis_path, metric, iou_thresh, stripe_width, out, config, fmt):
    """Score detections against ground truth."""
    cfg = _load_config(config)
    iou_thresh = _resolve(iou_thresh, "iou_thresh", cfg)
    stripe_width = _resolve(stripe_width, "stripe_width", cfg)
    fmt = _resolve(fmt, "format", cfg)
    basis = load_basis(basis_path)
    grid = basis.grid
    records = load_dataset(data, fmt, (grid.image_width, grid.image_height))
    by_id = {record.image_id: record for record in records}
    detections = load_detections(pred_path, grid)
    missing = [image_id for image_id, _, _ in detections if image_id not in by_id]
    if missing:
        raise SchemaError(f"detections reference unknown images: {missing[:3]}")
    if metric == "culane":
        reports = []
        for image_id, lanes, _ in detections:
            gt = by_id[image_id].resampled(grid)
            reports.append(match_lanes(lanes, gt, iou_thresh, stripe_width, image_id))
        report = f_measure(reports)
        _echo_kv(
            [
                ("images", len(reports)),
                ("tp", report.tp),
                ("fp", report.fp),
                ("fn", report.fn),
                ("precision", f"{report.precision:.6f}"),
                ("recall", f"{report.recall:.6f}"),
                ("f_measure", f"{report.f_measure:.6f}"),
            ]
        )
        if out is not None:
            save_match_report(report, _out_path(out))
    else:
        preds = []
        gts = []
        ids = []
        for image_id, lanes, _ in detections:
            preds.append(lanes)
            gts.append(by_id[image_id].resampled(grid))
            ids.append(image_id)
        report = tusimple_score(preds, gts, image_ids=ids)
        _echo_kv(
            [
                ("images", len(ids)),
                ("accuracy", f"{report.accuracy:.6f}"),
                ("fpr", f"{report.fpr:.6f}"),
                ("fnr", f"{report.fnr:.6f}"),
            ]
        )
        if out is not None:
            save_point_accuracy_report(report, _out_path(out))


@main.command()
@click.option("-d", "--data", required=True, type=click.Path())
@click.option("--image-id", "image_id", default=None, help="defaults to the first image")
@click.option("-b", "--basis", "basis_path", required=True, type=click.Path())
@click.option("-p", "--pred", "pred_path", type=click.Path(), default=None)
@click.option("-c", "--candidates", "candidates_path", type=click.Path(), default=None)
@click.option("--max-candidates", type=int, default=40, show_default=True)
@click.option("-o", "--out", required=True, type=click.Path())
@config_option
@format_option
def render(data, image_id, basis_path, pred_path, candidates_path, max_candidates, out,
           config, fmt):
    """Render ground truth (and optionally candidates / detections) as SVG."""
    cfg = _load_config(config)
    fmt = _resolve(fmt, "format", cfg)
    basis = load_basis(basis_path)
    grid = basis.grid
    records = load_dataset(data, fmt, (grid.image_width, grid.image_height))
    if image_id is None:
        record = records[0]
    else:
        match = [r for r in records if r.image_id == image_id]
        if not match:
            raise SchemaError(f"image '{image_id}' not in dataset")
        record = match[0]
    layers = []
    if candidates_path is not None:
        candidates = load_candidates(candidates_path)
        shown = candidates.lanes[: max_candidates]
        layers.append(LaneLayer("candidates", shown, "#3a4750", stroke_width=1.0))
    layers.append(LaneLayer("ground truth", record.resampled(grid), DEFAULT_COLORS[0]))
    if pred_path is not None:
        for det_id, lanes, _ in load_detections(pred_path, grid):
            if det_id == record.image_id:
                layers.append(
                    LaneLayer("detections", lanes, DEFAULT_COLORS[1], dash="6,4")
                )
                break
    path = _out_path(out)
    render_svg(record, layers, path)
    _echo_kv([("image", record.image_id), ("out", path)])


@main.command("iou")
@click.option("-d", "--data", required=True, type=click.Path())
@click.option("-b", "--basis", "basis_path", required=True, type=click.Path())
@click.option("--image-id", default=None)
@click.option("--stripe-width", type=int, default=None)
@click.option("--iou-mode", type=click.Choice(["interval", "pixel"]), default="interval",
              show_default=True)
@config_option
@format_option
def iou_cmd(data, basis_path, image_id, stripe_width, iou_mode, config, fmt):
    """Pairwise stripe IoU table of one image's lanes (audit helper)."""
    cfg = _load_config(config)
    stripe_width = _resolve(stripe_width, "stripe_width", cfg)
    fmt = _resolve(fmt, "format", cfg)
    basis = load_basis(basis_path)
    records = load_dataset(
        data, fmt, (basis.grid.image_width, basis.grid.image_height)
    )
    record = records[0] if image_id is None else next(
        (r for r in records if r.image_id == image_id), None
    )
    if record is None:
        raise SchemaError(f"image '{image_id}' not in dataset")
    lanes = record.resampled(basis.grid)
    fn = stripe_iou if iou_mode == "interval" else stripe_iou_pixelcount
    for i in range(len(lanes)):
        row = [f"{fn(lanes[i], lanes[j], stripe_width):.4f}" for j in range(len(lanes))]
        click.echo(" ".join(row))


if __name__ == "__main__":
    main()
