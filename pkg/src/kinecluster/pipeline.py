"""End-to-end orchestration: generate, featurize, cluster, score, reconstruct."""

from __future__ import annotations

import datetime as _dt
import os
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np
import scipy

from . import __version__
from .clustering import adjusted_rand_index, iforest, kmeans, ocsvm, spectral
from .config import RunConfig, save_config
from .ensemble import component_ground_truth, ensemble_pipeline, segment
from .errors import KineclusterError, ValidationError
from .forward_sim import build_domain, grid_points, sample_markers, solve_forward
from .imaging import emit_heatmap, emit_label_image
from .io import write_features, write_ground_truth, write_json, write_labels, write_markers
from .kinematics import assemble_features, compute_kinematics, interpolate_to_grid
from .reconstruction import sensor_sweep

THREADS_ENV = "KINECLUSTER_THREADS"


def max_workers():
    """Parallelism cap from ``KINECLUSTER_THREADS`` (default 1)."""
    raw = os.environ.get(THREADS_ENV, "1")
    try:
        value = int(raw)
    except ValueError as exc:
        raise ValidationError(f"{THREADS_ENV} must be an integer, got {raw!r}") from exc
    return max(1, value)


def parallel_map(fn, items):
    """Ordered map, concurrent when ``KINECLUSTER_THREADS`` > 1."""
    items = list(items)
    workers = min(max_workers(), len(items))
    if workers <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def solver_summary(field):
    d = field.diagnostics
    keys = ("load_steps", "newton_iterations", "residual_norm", "relative_residual", "min_jacobian", "energy")
    return {k: d[k] for k in keys}


def cluster(features, method="kmeans", k=2, seed=0, **params):
    """Dispatch to one of the base clustering methods."""
    if method == "kmeans":
        return kmeans(features, k, seed=seed, **params)
    if method == "spectral":
        return spectral(features, k=k, seed=seed, **params)
    if method == "iforest":
        return iforest(features, seed=seed, **params)
    if method == "ocsvm":
        return ocsvm(features, **params)
    raise ValidationError(f"unknown method {method!r}")


def generate(pattern, bc, n_markers=1000, seed=0, resolution=64, materials=None, grid=89, steps=10):
    """Solve one load case and sample markers; returns a dict of products."""
    kwargs = {} if materials is None else {"materials": tuple(tuple(m) for m in materials)}
    domain = build_domain(pattern, resolution, **kwargs)
    field = solve_forward(domain, bc, steps=steps)
    markers = sample_markers(field, n_markers, seed)
    points = grid_points(grid)
    return {
        "domain": domain,
        "field": field,
        "markers": markers,
        "points": points,
        "truth": domain.ground_truth(points),
    }


def generation_meta(product, bc, n_markers, seed):
    domain = product["domain"]
    return {
        "pattern": domain.pattern.to_dict(),
        "materials": [list(m) for m in domain.materials],
        "mesh_resolution": domain.resolution,
        "bc": bc.to_dict(),
        "markers": n_markers,
        "marker_seed": seed,
        "solver": solver_summary(product["field"]),
    }


def write_generation(out_dir, product, bc, n_markers, seed):
    out = Path(out_dir)
    write_markers(out / "markers.csv", product["markers"])
    write_ground_truth(out / "ground_truth.csv", product["points"], product["truth"])
    write_json(out / "meta.json", generation_meta(product, bc, n_markers, seed))


class StageError(KineclusterError):
    """Wraps a failure with the pipeline stage that raised it."""

    def __init__(self, stage, cause):
        super().__init__(f"stage '{stage}' failed: {cause}")
        self.stage = stage
        self.cause = cause
        self.exit_code = getattr(cause, "exit_code", 1)


def _stage(name, fn, *args, **kwargs):
    try:
        return fn(*args, **kwargs)
    except StageError:
        raise
    except KineclusterError as exc:
        raise StageError(name, exc) from exc


def run_experiment(config: RunConfig, out=None, timestamp=True):
    """Execute a configured run and write every artifact under ``out``.

    Returns the report dictionary that is also written to ``report.json``.
    On failure the partial artifacts stay on disk and ``report.json``
    records the failing stage.
    """
    out = Path(out or config.out)
    out.mkdir(parents=True, exist_ok=True)
    save_config(config, out / "config.json")
    pattern = config.pattern_spec
    bcs = config.boundary_conditions
    report = {
        "versions": {"kinecluster": __version__, "numpy": np.__version__, "scipy": scipy.__version__},
        "seeds": {"marker_seed": config.marker_seed, "cluster_seed": config.cluster_seed},
        "config": config.to_dict(),
        "cases": [],
    }
    if timestamp:
        report["created"] = _dt.datetime.now(_dt.timezone.utc).isoformat()

    try:
        products = _stage(
            "generate",
            parallel_map,
            lambda bc: generate(
                pattern,
                bc,
                config.markers,
                config.marker_seed,
                config.mesh_resolution,
                config.materials,
                config.grid,
                config.load_steps,
            ),
            bcs,
        )
        truth = products[0]["truth"]
        shape = (config.grid, config.grid)
        write_ground_truth(out / "ground_truth.csv", products[0]["points"], truth)
        emit_label_image(truth.reshape(shape), out / "ground_truth.ppm")
        components = component_ground_truth(truth, shape)

        feature_sets, grids = [], []
        for i, (bc, product) in enumerate(zip(bcs, products)):
            case_dir = out / "cases" / f"{i:02d}_{bc.name}"
            write_generation(case_dir, product, bc, config.markers, config.marker_seed)
            grid = _stage(
                "features",
                lambda m: compute_kinematics(interpolate_to_grid(m, R=config.grid, k=config.mls_k)),
                product["markers"],
            )
            fm = _stage("features", assemble_features, grid, config.feature_kind, config.standardize)
            grids.append(grid)
            feature_sets.append(fm)
            write_features(case_dir / "features.csv", fm, {"mls_k": config.mls_k, "bc": bc.name})
            emit_heatmap(grid.I1, case_dir / "I1.pgm")
            emit_heatmap(grid.E[:, 1, 1], case_dir / "E22.pgm")
            lab = _stage(
                "cluster",
                cluster,
                fm,
                config.method,
                config.k,
                config.cluster_seed,
                **config.method_params,
            )
            write_labels(case_dir / "labels.csv", lab)
            emit_label_image(lab, case_dir / "labels.ppm")
            entry = {
                "bc": bc.to_dict(),
                "name": bc.name,
                "solver": solver_summary(product["field"]),
                "ari": adjusted_rand_index(truth, lab),
                "flags": list(lab.flags),
            }
            if config.method == "kmeans":
                entry["kmeans_objective"] = lab.params["objective"]
            if lab.grid_shape is not None and len(bcs) > 1:
                seg = _stage("segment", segment, lab, config.min_size)
                entry["ari_segmented"] = adjusted_rand_index(components, seg)
            report["cases"].append(entry)

        if len(bcs) > 1:
            final = _stage(
                "ensemble",
                ensemble_pipeline,
                feature_sets,
                k_base=config.k,
                k_final=config.k_final,
                min_size=config.min_size,
                seed=config.cluster_seed,
            )
            ens_dir = out / "ensemble"
            stages = final.params["stages"]
            for i, (seg, bc) in enumerate(zip(stages["segmented"], bcs)):
                write_labels(ens_dir / "intermediate" / f"{i:02d}_{bc.name}_segmented.csv", seg)
            write_labels(ens_dir / "intermediate" / "cspa_raw.csv", stages["consensus"])
            write_labels(ens_dir / "consensus.csv", final)
            emit_label_image(final, ens_dir / "consensus.ppm")
            report["ensemble"] = {
                "ari": adjusted_rand_index(components, final),
                "k_final": final.params["k_final"],
                "n_segments": int(final.k),
                "eigenvalues": final.params["eigenvalues"][:10],
            }

        if config.reconstruct:
            rc = config.reconstruct
            strain_sets = [assemble_features(g, "green_lagrange", False) for g in grids]
            sweeps = {}
            single_case = rc.get("eval_case", 0)
            sweeps["single"] = _stage(
                "reconstruct",
                sensor_sweep,
                [strain_sets[single_case]],
                rc["k_range"],
                0,
                config.cluster_seed,
                tuple(rc.get("components", ("E22",))),
                config.min_size,
                products[0]["points"],
            )
            if len(strain_sets) > 1:
                sweeps["ensemble"] = _stage(
                    "reconstruct",
                    sensor_sweep,
                    strain_sets,
                    rc["k_range"],
                    single_case,
                    config.cluster_seed,
                    tuple(rc.get("components", ("E22",))),
                    config.min_size,
                    products[0]["points"],
                )
            rec_dir = out / "reconstruct"
            report["reconstruction"] = {}
            for mode, reports in sweeps.items():
                report["reconstruction"][mode] = [r.to_dict() for r in reports]
                for r in reports:
                    emit_heatmap(r.reconstructed[:, 0], rec_dir / f"{mode}_k{r.k:03d}.pgm")
            write_json(rec_dir / "sweep.json", report["reconstruction"])
    except StageError as exc:
        report["failed_stage"] = exc.stage
        report["error"] = str(exc.cause)
        write_json(out / "report.json", report)
        raise

    report["status"] = "ok"
    write_json(out / "report.json", report)
    return report
