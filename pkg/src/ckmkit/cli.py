"""Command line front end.

Subcommands cover the whole workflow: generate a dataset, reconstruct a
scene's interference map from sparse samples, localize interferers on a
reconstructed map, sweep reconstruction quality across sampling rates, and
render maps to PNG.  Every option can also be set through a CKM_* prefixed
environment variable (CKM_GEN_DATASET_SEED=5 etc.).

Exit codes: 0 success, 2 usage error, 3 file/container error, 4 numerical
failure (degenerate fits, singular systems).
"""

from __future__ import annotations

import csv
import dataclasses
import json
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import click
import numpy as np

from .channel import build_scene_maps
from .dataset import DatasetConfig, DatasetReader, generate_dataset
from .env import EnvConfig, InfeasibleEnvironmentError
from .grid import GridMap
from .interpolate import ReconstructionError
from .mapio import ContainerError, read_map, write_map
from .metrics import localization_error, nmse_db
from .pipeline import (
    DEFAULT_RATE_SWEEP,
    RECONSTRUCTION_METHODS,
    PipelineConfig,
    run_reconstruction,
)
from .postprocess import CFARConfig, DenormalizationError, localize_ins
from .render import write_falsecolor_png, write_grayscale_png
from .sampling import NormBounds, PathlossFitError, power_to_db

EXIT_USAGE = 2
EXIT_IO = 3
EXIT_NUMERICAL = 4

_NUMERICAL_ERRORS = (
    PathlossFitError,
    ReconstructionError,
    DenormalizationError,
    InfeasibleEnvironmentError,
    np.linalg.LinAlgError,
    FloatingPointError,
)


def _parse_kv_params(pairs) -> dict:
    out = {}
    for pair in pairs:
        if "=" not in pair:
            raise click.BadParameter(f"expected key=value, got {pair!r}", param_hint="--param")
        key, raw = pair.split("=", 1)
        for cast in (int, float):
            try:
                out[key] = cast(raw)
                break
            except ValueError:
                continue
        else:
            out[key] = raw
    return out


def _parse_float_list(raw: str, hint: str) -> tuple[float, ...]:
    try:
        vals = tuple(float(v) for v in raw.split(",") if v.strip())
    except ValueError as exc:
        raise click.BadParameter(str(exc), param_hint=hint)
    if not vals:
        raise click.BadParameter("empty list", param_hint=hint)
    return vals


@click.group(context_settings={"auto_envvar_prefix": "CKM"})
def cli():
    """Interference-aware channel map toolkit."""


@cli.command("gen-dataset")
@click.option("--out", "out_dir", required=True, type=click.Path(), help="Output directory.")
@click.option("--seed", default=0, show_default=True, type=int, help="Master seed.")
@click.option("--train", default=700, show_default=True, type=int)
@click.option("--val", default=100, show_default=True, type=int)
@click.option("--test", default=200, show_default=True, type=int)
@click.option("--size-m", default=512.0, show_default=True, type=float, help="Scene side length.")
@click.option("--resolution-m", default=4.0, show_default=True, type=float)
@click.option("--altitude-m", default=120.0, show_default=True, type=float, help="Receiver plane height.")
@click.option("--built-ratio", default=0.25, show_default=True, type=float)
@click.option("--buildings-per-km2", default=144.0, show_default=True, type=float)
@click.option("--bs-power-w", default=40.0, show_default=True, type=float)
@click.option("--in-powers-w", default="40,10,10", show_default=True, help="Comma separated interferer powers.")
@click.option("--fading/--no-fading", default=True, show_default=True, help="Realize shadowing and small-scale fading.")
@click.option("--workers", default=1, show_default=True, type=int)
def gen_dataset_cmd(
    out_dir, seed, train, val, test, size_m, resolution_m, altitude_m,
    built_ratio, buildings_per_km2, bs_power_w, in_powers_w, fading, workers,
):
    """Generate a seed-deterministic scene dataset."""
    env = EnvConfig(
        length_m=size_m,
        width_m=size_m,
        resolution_m=resolution_m,
        uav_altitude_m=altitude_m,
        built_ratio=built_ratio,
        buildings_per_km2=buildings_per_km2,
    )
    cfg = DatasetConfig(
        n_train=train,
        n_val=val,
        n_test=test,
        env=env,
        bs_power_w=bs_power_w,
        in_powers_w=_parse_float_list(in_powers_w, "--in-powers-w"),
        realize_fading=fading,
    )
    manifest = generate_dataset(cfg, out_dir, master_seed=seed, workers=workers)
    click.echo(f"wrote {cfg.n_scenes} scenes under {out_dir}")
    click.echo(f"manifest hash {manifest['manifest_hash']}")


@cli.command("reconstruct")
@click.option("--dataset", "dataset_dir", required=True, type=click.Path(exists=True, file_okay=False))
@click.option("--scene", "scene_id", required=True, help="Scene id, e.g. scene_0000.")
@click.option("--rate", default=0.2, show_default=True, type=float, help="Sampling fraction.")
@click.option("--sample-seed", default=0, show_default=True, type=int)
@click.option("--method", default="kriging", show_default=True,
              type=click.Choice(RECONSTRUCTION_METHODS))
@click.option("--param", "params", multiple=True, help="Estimator parameter key=value; repeatable.")
@click.option("--pathloss", default="robust", show_default=True,
              type=click.Choice(["robust", "plain", "true"]),
              help="robust/plain fit from samples; true uses the dataset's "
                   "generating parameters.")
@click.option("--out-dir", required=True, type=click.Path())
def reconstruct_cmd(dataset_dir, scene_id, rate, sample_seed, method, params, pathloss, out_dir):
    """Reconstruct interference and SINR maps for one scene."""
    reader = DatasetReader(dataset_dir)
    scene = reader.scene(scene_id)
    total = reader.load_map(scene_id, "r")
    cfg = PipelineConfig(
        rate=rate,
        sample_seed=sample_seed,
        method=method,
        estimator_params=_parse_kv_params(params),
        pathloss_mode=pathloss,
        pathloss_priors=reader.dataset_config().channel,
        localize=False,
    )
    result = run_reconstruction(
        total, scene.env, scene.bs, reader.norm_bounds(), scene.noise_power_w, cfg
    )
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    iss_path = out / f"{scene_id}_iss_hat.map"
    sinr_path = out / f"{scene_id}_sinr_hat.map"
    for m in (result.iss_hat, result.sinr_hat):
        m.meta["scene_id"] = scene_id
    write_map(iss_path, result.iss_hat)
    write_map(sinr_path, result.sinr_hat)
    click.echo(f"samples used      {result.samples.count}")
    click.echo(f"negative fraction {result.extraction.negative_fraction:.3f}")
    click.echo(
        "denorm range      "
        f"[{result.denorm.r_min_db_hat:.2f}, {result.denorm.r_max_db_hat:.2f}] dB "
        f"({result.denorm.n_points} points)"
    )
    truth = reader.load_map(scene_id, "rin")
    click.echo(f"dB-domain MSE     {nmse_db(result.iss_hat, truth):.4f} dB^2")
    click.echo(f"wrote {iss_path}")
    click.echo(f"wrote {sinr_path}")


@cli.command("localize")
@click.option("--map", "map_path", required=True, type=click.Path(exists=True, dir_okay=False),
              help="Interference map (.map, power in watts or dB).")
@click.option("--out", "out_csv", required=True, type=click.Path())
@click.option("--guard", default=2, show_default=True, type=int)
@click.option("--train-cells", default=4, show_default=True, type=int)
@click.option("--pfa", default=0.3, show_default=True, type=float)
def localize_cmd(map_path, out_csv, guard, train_cells, pfa):
    """Detect interferer positions on a reconstructed map with 2-D CFAR."""
    grid = read_map(map_path)
    if grid.kind == "rss_watts":
        grid = GridMap(power_to_db(grid.data), "gain_db", dict(grid.meta))
    elif grid.kind != "gain_db":
        raise click.BadParameter(
            f"map kind {grid.kind!r} is not localizable", param_hint="--map"
        )
    result = localize_ins(grid, CFARConfig(guard=guard, train=train_cells, pfa=pfa))
    scene_id = grid.meta.get("scene_id", Path(map_path).stem)
    with open(out_csv, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["scene_id", "det_idx", "x_px", "y_px", "score_db"])
        for i, det in enumerate(result.detections):
            writer.writerow([scene_id, i, det.x_px, det.y_px, f"{det.score_db:.6f}"])
    click.echo(f"detections {result.m_hat}")
    for det in result.detections[:10]:
        click.echo(f"  ({det.x_px}, {det.y_px})  score {det.score_db:.2f} dB")
    if result.m_hat > 10:
        click.echo(f"  ... {result.m_hat - 10} more in the CSV")
    click.echo(f"wrote {out_csv}")


def _evaluate_one(task: tuple) -> dict:
    root, scene_id, rate, method, sample_seed, pathloss_mode, cfar_args = task
    reader = DatasetReader(root)
    scene = reader.scene(scene_id)
    total = reader.load_map(scene_id, "r")
    cfg = PipelineConfig(
        rate=rate,
        sample_seed=sample_seed,
        method=method,
        pathloss_mode=pathloss_mode,
        pathloss_priors=reader.dataset_config().channel,
        cfar=CFARConfig(*cfar_args),
    )
    result = run_reconstruction(
        total, scene.env, scene.bs, reader.norm_bounds(), scene.noise_power_w, cfg
    )
    truth_iss = reader.load_map(scene_id, "rin")
    truth_sinr = reader.load_map(scene_id, "sinr")
    return {
        "scene": scene_id,
        "rate": rate,
        "method": method,
        "iss_mse_db2": nmse_db(result.iss_hat, truth_iss),
        "sinr_mse_db2": nmse_db(result.sinr_hat, truth_sinr),
        "negative_fraction": result.extraction.negative_fraction,
        "m_hat": result.localization.m_hat,
        "detections": [[d.x_px, d.y_px] for d in result.localization.detections],
        "true_ins": reader.true_in_pixels(scene_id).tolist(),
    }


@cli.command("evaluate")
@click.option("--dataset", "dataset_dir", required=True, type=click.Path(exists=True, file_okay=False))
@click.option("--split", default="test", show_default=True)
@click.option("--rates", default=",".join(str(r) for r in DEFAULT_RATE_SWEEP), show_default=True)
@click.option("--methods", default="kriging", show_default=True,
              help="Comma separated subset of knn,idw,rbf,kriging.")
@click.option("--max-scenes", default=0, show_default=True, type=int,
              help="Limit scene count (0 = whole split).")
@click.option("--sample-seed", default=0, show_default=True, type=int)
@click.option("--pathloss", default="robust", show_default=True,
              type=click.Choice(["robust", "plain", "true"]))
@click.option("--guard", default=2, show_default=True, type=int)
@click.option("--train-cells", default=4, show_default=True, type=int)
@click.option("--pfa", default=0.3, show_default=True, type=float)
@click.option("--estimates", "estimates_dir", default=None, type=click.Path(exists=True, file_okay=False),
              help="Score precomputed maps instead of running the pipeline.")
@click.option("--out", "out_json", default=None, type=click.Path())
@click.option("--out-csv", "out_csv", default=None, type=click.Path(),
              help="Summary table as CSV, one row per method and rate.")
@click.option("--workers", default=1, show_default=True, type=int)
def evaluate_cmd(dataset_dir, split, rates, methods, max_scenes, sample_seed,
                 pathloss, guard, train_cells, pfa, estimates_dir, out_json,
                 out_csv, workers):
    """Score reconstruction quality over a split.

    Default mode sweeps sampling rates and methods through the full chain.
    With --estimates, score an existing directory of per-scene maps
    (<scene_id>.map, or a dataset-style scenes/<id>/rin.map tree) against
    the split's ground truth instead.
    """
    reader = DatasetReader(dataset_dir)
    scene_ids = reader.scene_ids(split)
    if max_scenes > 0:
        scene_ids = scene_ids[:max_scenes]
    if not scene_ids:
        raise click.BadParameter(f"split {split!r} is empty", param_hint="--split")

    if estimates_dir is not None:
        rows = []
        for sid in scene_ids:
            est_path = Path(estimates_dir) / f"{sid}.map"
            if not est_path.exists():
                est_path = Path(estimates_dir) / "scenes" / sid / "rin.map"
            est = read_map(est_path)
            truth = reader.load_map(sid, "rin")
            rows.append({"scene": sid, "iss_mse_db2": nmse_db(est, truth)})
        mean_mse = float(np.mean([r["iss_mse_db2"] for r in rows]))
        click.echo(f"{'scene':<14}{'MSE(dB^2)':>12}")
        for r in rows:
            click.echo(f"{r['scene']:<14}{r['iss_mse_db2']:>12.6f}")
        click.echo(f"{'mean':<14}{mean_mse:>12.6f}")
        if out_json:
            Path(out_json).write_text(json.dumps(
                {"dataset": str(dataset_dir), "split": split,
                 "estimates": str(estimates_dir), "entries": rows,
                 "mean_iss_mse_db2": mean_mse},
                indent=1, sort_keys=True))
            click.echo(f"wrote {out_json}")
        if out_csv:
            with open(out_csv, "w", newline="") as fh:
                writer = csv.writer(fh)
                writer.writerow(["scene", "iss_mse_db2"])
                for r in rows:
                    writer.writerow([r["scene"], f"{r['iss_mse_db2']:.10g}"])
            click.echo(f"wrote {out_csv}")
        return

    rate_list = _parse_float_list(rates, "--rates")
    method_list = tuple(m.strip() for m in methods.split(",") if m.strip())
    for m in method_list:
        if m not in RECONSTRUCTION_METHODS:
            raise click.BadParameter(f"unknown method {m!r}", param_hint="--methods")

    cfar_args = (guard, train_cells, pfa)
    tasks = [
        (str(dataset_dir), sid, rate, method, sample_seed, pathloss, cfar_args)
        for method in method_list
        for rate in rate_list
        for sid in scene_ids
    ]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            entries = list(pool.map(_evaluate_one, tasks, chunksize=1))
    else:
        entries = [_evaluate_one(t) for t in tasks]

    summary = []
    click.echo(f"{'method':<10}{'rate':>6}{'MSE(dB^2)':>12}{'SINR MSE':>12}"
               f"{'loc err px':>12}{'mean Mhat':>10}")
    for method in method_list:
        for rate in rate_list:
            group = [e for e in entries if e["method"] == method and e["rate"] == rate]
            loc = localization_error(
                [np.array(e["detections"], dtype=float).reshape(-1, 2) for e in group],
                [np.array(e["true_ins"], dtype=float).reshape(-1, 2) for e in group],
            )
            row = {
                "method": method,
                "rate": rate,
                "mean_iss_mse_db2": float(np.mean([e["iss_mse_db2"] for e in group])),
                "mean_sinr_mse_db2": float(np.mean([e["sinr_mse_db2"] for e in group])),
                "mean_m_hat": float(np.mean([e["m_hat"] for e in group])),
                "localization": {
                    "mean_error_px": loc.mean_error_px,
                    "n_scored": loc.n_scored,
                    "n_empty": loc.n_empty,
                },
            }
            summary.append(row)
            loc_txt = ("%.3f" % loc.mean_error_px) if loc.n_scored else "n/a"
            click.echo(f"{method:<10}{rate:>6.2f}{row['mean_iss_mse_db2']:>12.4f}"
                       f"{row['mean_sinr_mse_db2']:>12.4f}{loc_txt:>12}"
                       f"{row['mean_m_hat']:>10.2f}")
    if out_json:
        Path(out_json).write_text(json.dumps(
            {"dataset": str(dataset_dir), "split": split,
             "sample_seed": sample_seed, "pathloss": pathloss,
             "entries": entries, "summary": summary},
            indent=1, sort_keys=True))
        click.echo(f"wrote {out_json}")
    if out_csv:
        with open(out_csv, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["method", "rate", "mean_iss_mse_db2",
                             "mean_sinr_mse_db2", "mean_m_hat",
                             "loc_mean_error_px", "loc_n_scored", "loc_n_empty"])
            for row in summary:
                loc = row["localization"]
                writer.writerow([
                    row["method"], row["rate"],
                    f"{row['mean_iss_mse_db2']:.10g}",
                    f"{row['mean_sinr_mse_db2']:.10g}",
                    f"{row['mean_m_hat']:.10g}",
                    f"{loc['mean_error_px']:.10g}" if loc["n_scored"] else "",
                    loc["n_scored"], loc["n_empty"],
                ])
        click.echo(f"wrote {out_csv}")


def _read_marker_csv(path, x_col, y_col):
    pts = []
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            pts.append([float(row[x_col]), float(row[y_col])])
    return np.array(pts, dtype=float).reshape(-1, 2)


@cli.command("render")
@click.option("--map", "map_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--out", "out_png", required=True, type=click.Path())
@click.option("--falsecolor", is_flag=True, default=False, help="Color render instead of grayscale.")
@click.option("--colormap", default="viridis", show_default=True)
@click.option("--range-db", default=None, help="Override dB range as LO,HI.")
@click.option("--truth-csv", default=None, type=click.Path(exists=True, dir_okay=False),
              help="Interferer table (ins.csv) to overlay as dots.")
@click.option("--detections-csv", default=None, type=click.Path(exists=True, dir_okay=False),
              help="Detection table to overlay as crosses.")
def render_cmd(map_path, out_png, falsecolor, colormap, range_db, truth_csv, detections_csv):
    """Render a stored map to PNG (plus a JSON sidecar with the dB range)."""
    grid = read_map(map_path)
    bounds = None
    if range_db is not None:
        lo, hi = _parse_float_list(range_db, "--range-db")[:2]
        bounds = NormBounds(lo, hi)
    if falsecolor or truth_csv or detections_csv:
        true_px = _read_marker_csv(truth_csv, "x_px", "y_px") if truth_csv else None
        est_px = _read_marker_csv(detections_csv, "x_px", "y_px") if detections_csv else None
        info = write_falsecolor_png(out_png, grid, bounds, true_px, est_px, colormap)
    else:
        info = write_grayscale_png(out_png, grid, bounds)
    rng_txt = info.get("range_db")
    if rng_txt:
        click.echo(f"range [{rng_txt['r_min_db']:.2f}, {rng_txt['r_max_db']:.2f}] dB")
    click.echo(f"wrote {out_png}")


def main(argv=None) -> int:
    try:
        cli.main(args=argv, standalone_mode=False)
        return 0
    except click.exceptions.Abort:
        click.echo("aborted", err=True)
        return EXIT_USAGE
    except click.ClickException as exc:
        exc.show()
        return EXIT_USAGE
    except _NUMERICAL_ERRORS as exc:
        click.echo(f"numerical error: {exc}", err=True)
        return EXIT_NUMERICAL
    except (OSError, ContainerError) as exc:
        click.echo(f"i/o error: {exc}", err=True)
        return EXIT_IO
    except (KeyError, ValueError) as exc:
        click.echo(f"error: {exc}", err=True)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
