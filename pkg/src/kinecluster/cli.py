"""``kinecluster`` command-line interface."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from .clustering import METHODS, adjusted_rand_index
from .config import load_config
from .ensemble import component_ground_truth, ensemble_pipeline
from .errors import DataIOError, KineclusterError, ValidationError
from .forward_sim import BC_KINDS, PatternSpec, make_boundary_condition
from .forward_sim.patterns import PATTERN_KINDS
from .imaging import emit_heatmap, emit_label_image
from .io import (
    read_features,
    read_ground_truth,
    read_labels,
    read_markers,
    write_features,
    write_json,
    write_labels,
)
from .kinematics import FEATURE_KINDS, assemble_features, compute_kinematics, interpolate_to_grid
from .pipeline import cluster, generate, run_experiment, write_generation
from .reconstruction import sensor_sweep

log = logging.getLogger("kinecluster")


def parse_k_range(text):
    """``a,b,c`` lists values; ``a:b`` doubles from a up to b (b included);
    ``a:b:s`` steps arithmetically."""
    try:
        if "," in text:
            return sorted({int(v) for v in text.split(",")})
        parts = [int(v) for v in text.split(":")]
    except ValueError as exc:
        raise ValidationError(f"bad k range {text!r}") from exc
    if len(parts) == 1:
        return parts
    if len(parts) == 3:
        return list(range(parts[0], parts[1] + 1, parts[2]))
    lo, hi = parts
    if lo < 1 or hi < lo:
        raise ValidationError(f"bad k range {text!r}")
    out, k = [], lo
    while k < hi:
        out.append(k)
        k *= 2
    return out + [hi]


def _k_final(text):
    if text is None or text == "auto":
        return text
    return int(text)


def cmd_generate(args):
    pattern = PatternSpec.raster(args.raster) if args.pattern == "raster" else getattr(PatternSpec, args.pattern)()
    bc = make_boundary_condition(
        args.bc, magnitude=args.delta, seed=args.bc_seed, dx=args.dx, dy=args.dy, grips=args.grips
    )
    materials = ((args.e_background, args.nu), (args.e_inclusion, args.nu))
    product = generate(pattern, bc, args.markers, args.seed, args.resolution, materials, args.grid, args.steps)
    write_generation(args.out, product, bc, args.markers, args.seed)
    d = product["field"].diagnostics
    print(f"wrote {args.out}: {args.markers} markers, relative residual {d['relative_residual']:.2e}")


def cmd_features(args):
    markers = read_markers(args.input)
    grid = compute_kinematics(interpolate_to_grid(markers, R=args.grid, k=args.neighbors))
    fm = assemble_features(grid, args.kind, args.standardize)
    write_features(args.out, fm, {"mls_k": args.neighbors, **grid.info})
    if args.heatmap:
        emit_heatmap(fm.values[:, 0], args.heatmap)
    print(f"wrote {args.out}: {fm.n} rows x {fm.d} {args.kind} features")


def cmd_cluster(args):
    fm = read_features(args.features)
    params = {}
    if args.method == "spectral":
        params["gamma"] = args.gamma
    elif args.method == "iforest":
        params.update(trees=args.trees, subsample=args.subsample, contamination=args.contamination)
    elif args.method == "ocsvm":
        params["nu"] = args.nu
    lab = cluster(fm, args.method, args.k, args.seed, **params)
    write_labels(args.out, lab, {"seed": args.seed, "features": str(args.features)})
    if args.image:
        emit_label_image(lab, args.image)
    print(f"wrote {args.out}: {lab.k} clusters, sizes {lab.sizes.tolist()}")


def cmd_ensemble(args):
    fsets = [read_features(p) for p in args.features]
    final = ensemble_pipeline(
        fsets, k_base=args.k, k_final=_k_final(args.k_final), min_size=args.min_size, seed=args.seed
    )
    write_labels(args.out, final, {"inputs": [str(p) for p in args.features]})
    if args.dump_intermediate:
        root = Path(args.dump_intermediate)
        stages = final.params["stages"]
        for i, (base, seg) in enumerate(zip(stages["base"], stages["segmented"])):
            write_labels(root / f"{i:02d}_base.csv", base)
            write_labels(root / f"{i:02d}_segmented.csv", seg)
            emit_label_image(seg, root / f"{i:02d}_segmented.ppm")
        write_labels(root / "cspa.csv", stages["consensus"])
        emit_label_image(final, root / "final.ppm")
    print(f"wrote {args.out}: k_final={final.params['k_final']}, {final.k} segments")


def cmd_score(args):
    lab = read_labels(args.labels)
    _, truth = read_ground_truth(args.truth)
    if len(truth) != len(lab):
        raise ValidationError(f"truth has {len(truth)} rows, labels {len(lab)}")
    if args.components:
        side = int(round(np.sqrt(len(truth))))
        truth = component_ground_truth(truth, (side, side))
    ari = adjusted_rand_index(truth, lab)
    report = {
        "ari": ari,
        "labels": str(args.labels),
        "truth": str(args.truth),
        "components": bool(args.components),
        "method": lab.method,
        "n": len(lab),
        "clusters": int(lab.k),
    }
    print(f"{ari:.6f}")
    print(json.dumps(report, sort_keys=True))
    if args.report:
        write_json(args.report, report)


def cmd_reconstruct(args):
    ks = parse_k_range(args.k_range)
    fsets = [read_features(args.features)]
    if any(fs.kind != "green_lagrange" for fs in fsets):
        raise ValidationError("reconstruction expects green_lagrange features")
    component = (args.eval_component,)
    sweeps = {"single": sensor_sweep(fsets, ks, 0, args.seed, component, args.min_size)}
    if args.ensemble:
        more = [read_features(p) for p in args.ensemble]
        sweeps["ensemble"] = sensor_sweep(fsets + more, ks, 0, args.seed, component, args.min_size)
    result = {"k_range": ks, "component": args.eval_component}
    result.update({mode: [r.to_dict() for r in reports] for mode, reports in sweeps.items()})
    write_json(args.out, result)
    if args.heatmaps:
        for mode, reports in sweeps.items():
            for r in reports:
                emit_heatmap(r.reconstructed[:, 0], Path(args.heatmaps) / f"{mode}_k{r.k:03d}.pgm")
    for r in result["single"]:
        print(f"k={r['k']:4d} sensors={r['n_sensors']:5d} mse={r['mse']:.4e}")


def cmd_run(args):
    config = load_config(args.config)
    report = run_experiment(config, args.out)
    for case in report["cases"]:
        print(f"{case['name']}: ARI={case['ari']:.4f}")
    if "ensemble" in report:
        print(f"ensemble: ARI={report['ensemble']['ari']:.4f}")


def cmd_paper_suite(args):
    from .experiments import CRITERIA

    numbers = [int(v) for v in args.criteria.split(",")] if args.criteria else sorted(CRITERIA)
    results = []
    for n in numbers:
        if n not in CRITERIA:
            raise ValidationError(f"no criterion {n}")
        res = CRITERIA[n]()
        print(res.line(), flush=True)
        results.append({"number": res.number, "name": res.name, "passed": res.passed, "summary": res.summary,
                        "details": res.details})
    if args.out:
        write_json(args.out, {"criteria": results})
    return 0 if all(r["passed"] for r in results) else 1


def build_parser():
    p = argparse.ArgumentParser(prog="kinecluster", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="solve a load case and sample markers")
    g.add_argument("--pattern", choices=PATTERN_KINDS, default="circle")
    g.add_argument("--raster", help="two-phase image for --pattern raster")
    g.add_argument("--bc", choices=BC_KINDS, default="equibiaxial")
    g.add_argument("--delta", type=float, default=0.3, help="nominal stretch of standard BCs")
    g.add_argument("--bc-seed", type=int, help="seed of a random BC")
    g.add_argument("--dx", type=float)
    g.add_argument("--dy", type=float)
    g.add_argument("--grips", choices=("roller", "clamped"), default="roller")
    g.add_argument("--markers", type=int, default=1000)
    g.add_argument("--seed", type=int, default=0, help="marker sampling seed")
    g.add_argument("--resolution", type=int, default=64, help="mesh cells per side")
    g.add_argument("--steps", type=int, default=10, help="load increments")
    g.add_argument("--grid", type=int, default=89)
    g.add_argument("--e-background", type=float, default=1.0)
    g.add_argument("--e-inclusion", type=float, default=10.0)
    g.add_argument("--nu", type=float, default=0.3)
    g.add_argument("--out", required=True)
    g.set_defaults(func=cmd_generate)

    f = sub.add_parser("features", help="grid markers and compute kinematic features")
    f.add_argument("--in", dest="input", required=True)
    f.add_argument("--grid", type=int, default=89)
    f.add_argument("--kind", choices=tuple(FEATURE_KINDS), default="invariants")
    f.add_argument("--neighbors", type=int, default=16, help="MLS neighbour count")
    f.add_argument("--standardize", action=argparse.BooleanOptionalAction, default=None)
    f.add_argument("--heatmap", help="PGM of the first feature column")
    f.add_argument("--out", required=True)
    f.set_defaults(func=cmd_features)

    c = sub.add_parser("cluster", help="cluster one feature file")
    c.add_argument("--features", required=True)
    c.add_argument("--method", choices=METHODS, default="kmeans")
    c.add_argument("--k", type=int, default=2)
    c.add_argument("--seed", type=int, default=0)
    c.add_argument("--gamma", type=float, default=1.0, help="spectral RBF width")
    c.add_argument("--nu", type=float, default=0.2, help="one-class SVM nu")
    c.add_argument("--trees", type=int, default=100)
    c.add_argument("--subsample", type=int, default=256)
    c.add_argument("--contamination", type=float)
    c.add_argument("--image", help="PPM label image")
    c.add_argument("--out", required=True)
    c.set_defaults(func=cmd_cluster)

    e = sub.add_parser("ensemble", help="consensus clustering over several load cases")
    e.add_argument("--features", nargs="+", required=True)
    e.add_argument("--k", type=int, default=2)
    e.add_argument("--k-final", default=None, help="integer or 'auto' (default: --k)")
    e.add_argument("--min-size", type=int, default=5)
    e.add_argument("--seed", type=int, default=0)
    e.add_argument("--out", required=True)
    e.add_argument("--dump-intermediate")
    e.set_defaults(func=cmd_ensemble)

    s = sub.add_parser("score", help="ARI of a labeling against ground truth")
    s.add_argument("--labels", required=True)
    s.add_argument("--truth", required=True)
    s.add_argument("--components", action="store_true", help="split truth into connected components")
    s.add_argument("--report", help="also write the JSON report here")
    s.set_defaults(func=cmd_score)

    r = sub.add_parser("reconstruct", help="medoid strain reconstruction sweep")
    r.add_argument("--features", required=True)
    r.add_argument("--ensemble", nargs="+")
    r.add_argument("--k-range", default="2:64")
    r.add_argument("--eval-component", choices=FEATURE_KINDS["green_lagrange"], default="E22")
    r.add_argument("--min-size", type=int, default=5)
    r.add_argument("--seed", type=int, default=0)
    r.add_argument("--heatmaps", help="directory for per-k PGM heatmaps")
    r.add_argument("--out", required=True)
    r.set_defaults(func=cmd_reconstruct)

    run = sub.add_parser("run", help="execute a JSON run configuration")
    run.add_argument("--config", required=True)
    run.add_argument("--out")
    run.set_defaults(func=cmd_run)

    ps = sub.add_parser("paper-suite", help="run the benchmark criteria")
    ps.add_argument("--criteria", help="comma-separated subset, e.g. 1,3")
    ps.add_argument("--out", help="JSON results file")
    ps.set_defaults(func=cmd_paper_suite)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args) or 0
    except KineclusterError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return DataIOError.exit_code


if __name__ == "__main__":
    sys.exit(main())
