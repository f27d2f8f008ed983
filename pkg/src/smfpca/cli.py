"""Command-line interface.

Subcommands
-----------
fit
    Extract smoothed principal components from a mesh + data CSV.
simulate
    Generate synthetic datasets on a given or generated mesh.
evaluate
    Score a fit against generator truth, optionally against the
    multivariate PCA baseline.
mesh-info
    Print mesh census statistics as JSON.

Every command resolves its configuration from hard defaults, then an
optional ``--config`` JSON file, then explicit flags, and writes the
fully resolved configuration to ``manifest.json`` in the output
directory. Re-running with ``--config manifest.json`` reproduces the
run exactly. Exit codes: 0 success, 2 input error, 3 numerical error.
"""

import argparse
import json
import os
import sys
import warnings

import numpy as np
import scipy

from . import __version__
from .errors import InputError, NumericalError
from . import estimator, fem, mesh as meshmod, metrics, selection, serialize, synth

_FIT_DEFAULTS = {
    "mesh": None,
    "data": None,
    "outdir": ".",
    "n_components": 3,
    "lambda_grid": None,
    "selection": "kfold",
    "folds": 5,
    "fixed_lambda": None,
    "center": True,
    "max_iterations": 15,
    "tolerance": 1e-6,
    "seed": 0,
    "threads": 1,
    "export_matrices": False,
}

_SIMULATE_DEFAULTS = {
    "generator": "sphere",
    "mesh": None,
    "sphere": None,
    "outdir": ".",
    "n": 50,
    "noise": 0.1,
    "seed": 0,
    "sigmas": None,
    "eigen_indices": [1, 2, 3],
    "shift_set": [0.0, 0.4],
}

_EVALUATE_DEFAULTS = {
    "result": None,
    "truth": None,
    "outdir": ".",
    "mesh": None,
    "data": None,
    "replicate": 0,
    "method_label": "smfpca",
    "append": False,
}


def _float_list(text):
    return [float(tok) for tok in str(text).split(",") if tok.strip() != ""]


def _int_list(text):
    return [int(tok) for tok in str(text).split(",") if tok.strip() != ""]


def _load_config_file(path):
    document = serialize.load_json(path)
    if not isinstance(document, dict):
        raise InputError(f"{path}: config must be a JSON object")
    # a manifest doubles as a config file
    if isinstance(document.get("config"), dict):
        document = document["config"]
    return document


def _resolve(args, defaults):
    """Defaults, overlaid by the config file, overlaid by given flags."""
    config = dict(defaults)
    if getattr(args, "config", None):
        loaded = _load_config_file(args.config)
        unknown = set(loaded) - set(defaults)
        if unknown:
            raise InputError(
                f"unknown config keys: {', '.join(sorted(unknown))}"
            )
        config.update(loaded)
    for key in defaults:
        value = getattr(args, key, None)
        if value is not None:
            config[key] = value
    return config


def _require(config, key, flag):
    if config.get(key) is None:
        raise InputError(f"missing required parameter: {flag}")
    return config[key]


def _versions():
    return {
        "smfpca": __version__,
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "python": ".".join(str(v) for v in sys.version_info[:3]),
    }


def _write_manifest(outdir, command, config):
    serialize.write_json(
        os.path.join(outdir, "manifest.json"),
        {"command": command, "config": config, "versions": _versions()},
    )


def _ensure_outdir(config):
    outdir = config["outdir"]
    os.makedirs(outdir, exist_ok=True)
    return outdir


def _load_mesh_checked(path):
    if path is None or not os.path.exists(path):
        raise InputError(f"mesh file not found: {path}")
    return meshmod.load_mesh(path)


# -- fit --------------------------------------------------------------


def cmd_fit(config) -> int:
    outdir = _ensure_outdir(config)
    surface = _load_mesh_checked(_require(config, "mesh", "--mesh"))
    data_path = _require(config, "data", "--data")
    if not os.path.exists(data_path):
        raise InputError(f"data file not found: {data_path}")
    values = serialize.read_data_csv(data_path)
    if values.shape[1] != surface.K:
        raise InputError(
            f"{data_path}: {values.shape[1]} data columns for a mesh "
            f"with {surface.K} vertices"
        )
    locations = meshmod.vertex_locations(surface)
    ops = fem.assemble(surface, locations)

    if config["lambda_grid"] is None:
        grid = selection.default_lambda_grid(ops)
        config = dict(config, lambda_grid=[float(v) for v in grid])
    grid = np.asarray(config["lambda_grid"], dtype=np.float64)

    common = dict(
        n_components=config["n_components"],
        lambda_grid=grid,
        ops=ops,
        selection=config["selection"],
        folds=config["folds"],
        fixed_lambda=config["fixed_lambda"],
        max_iterations=config["max_iterations"],
        tolerance=config["tolerance"],
        seed=config["seed"],
        threads=config["threads"],
    )
    if np.isnan(values).any():
        warnings.warn(
            "data has missing entries: fitting per-function observations, "
            "centering skipped",
            stacklevel=2,
        )
        obs = estimator.ObservationSet.from_masked(values, locations)
        result = estimator.fit_missing(obs, **common)
    else:
        result = estimator.fit(
            estimator.DataMatrix(values), center=config["center"], **common
        )

    serialize.write_json(
        os.path.join(outdir, "result.json"), serialize.result_to_dict(result)
    )
    scores = np.stack([c.scores for c in result.components], axis=1)
    vertex_values = np.stack(
        [c.f_coefficients for c in result.components], axis=1
    )
    serialize.write_matrix_csv(os.path.join(outdir, "scores.csv"), scores, "pc")
    serialize.write_matrix_csv(
        os.path.join(outdir, "vertex_values.csv"), vertex_values, "pc"
    )
    if config["export_matrices"]:
        from scipy.io import mmwrite

        mmwrite(os.path.join(outdir, "mass.mtx"), ops.mass)
        mmwrite(os.path.join(outdir, "stiffness.mtx"), ops.stiffness)
        mmwrite(os.path.join(outdir, "psi.mtx"), ops.psi)
    _write_manifest(outdir, "fit", config)
    return 0


# -- simulate ---------------------------------------------------------


def _simulation_mesh(config, outdir):
    if config["sphere"] is not None and config["mesh"] is not None:
        raise InputError("give either --mesh or --sphere, not both")
    if config["sphere"] is not None:
        surface = meshmod.unit_sphere_mesh(int(config["sphere"]))
        meshmod.save_mesh(surface, os.path.join(outdir, "mesh.off"))
        return surface
    return _load_mesh_checked(_require(config, "mesh", "--mesh or --sphere"))


def cmd_simulate(config) -> int:
    outdir = _ensure_outdir(config)
    surface = _simulation_mesh(config, outdir)
    locations = meshmod.vertex_locations(surface)
    ops = fem.assemble(surface, locations)

    generator = config["generator"]
    if generator == "eigen":
        sigmas = config["sigmas"] or [5.0, 3.0, 1.0]
        config = dict(config, sigmas=[float(v) for v in sigmas])
        dataset = synth.generate_eigen_dataset(
            surface, ops, config["eigen_indices"], config["sigmas"],
            config["n"], config["noise"], config["seed"],
        )
    elif generator == "sphere":
        sigmas = config["sigmas"] or [4.0, 2.0]
        config = dict(config, sigmas=[float(v) for v in sigmas])
        dataset = synth.generate_sphere_dataset(
            surface, ops, config["n"], config["sigmas"], config["noise"],
            config["seed"],
        )
    elif generator == "misaligned":
        sigmas = config["sigmas"] or [4.0]
        config = dict(config, sigmas=[float(v) for v in sigmas])
        dataset = synth.generate_misaligned_dataset(
            surface, ops, config["n"], config["sigmas"][0],
            config["shift_set"], config["seed"],
        )
    else:
        raise InputError(f"unknown generator: {generator!r}")

    serialize.write_data_csv(
        os.path.join(outdir, "data.csv"), dataset.X.values
    )
    serialize.write_json(
        os.path.join(outdir, "truth.json"), serialize.truth_to_dict(dataset)
    )
    _write_manifest(outdir, "simulate", config)
    return 0


# -- evaluate ---------------------------------------------------------


def _metric_rows(replicate, label, report):
    rows = []
    for j, v in enumerate(report.pc_function_mse, start=1):
        rows.append((replicate, label, "pcFunctionMse", j, v))
    for j, v in enumerate(report.score_mse, start=1):
        rows.append((replicate, label, "scoreMse", j, v))
    rows.append((replicate, label, "signalMse", None, report.signal_mse))
    rows.append((replicate, label, "principalAngle", None, report.principal_angle))
    return rows


def cmd_evaluate(config) -> int:
    outdir = _ensure_outdir(config)
    result_doc = serialize.load_json(_require(config, "result", "--result"))
    truth_doc = serialize.load_json(_require(config, "truth", "--truth"))
    est_values, est_scores, norms, curve = serialize.arrays_from_result(result_doc)
    true_values, true_scores = serialize.arrays_from_truth(truth_doc)

    report = metrics.evaluate_arrays(
        est_values, est_scores, norms, true_values, true_scores,
        explained_variance_curve=curve,
    )
    serialize.write_json(
        os.path.join(outdir, "evaluation.json"), serialize.report_to_dict(report)
    )
    rows = _metric_rows(config["replicate"], config["method_label"], report)

    # optional unsmoothed baseline on the raw data
    if config["data"] is not None:
        surface = _load_mesh_checked(_require(config, "mesh", "--mesh"))
        baseline_values = serialize.read_data_csv(config["data"])
        if np.isnan(baseline_values).any():
            raise InputError(
                "multivariate PCA baseline needs fully observed data"
            )
        ops = fem.assemble(surface, meshmod.vertex_locations(surface))
        comps = metrics.mv_pca(
            estimator.DataMatrix(baseline_values), est_values.shape[1], ops
        )
        mv_values = np.stack([c.coefficients for c in comps], axis=1)
        mv_scores = np.stack([c.scores for c in comps], axis=1)
        mv_norms = np.asarray([c.function_norm for c in comps])
        mv_report = metrics.evaluate_arrays(
            mv_values, mv_scores, mv_norms, true_values, true_scores
        )
        rows += _metric_rows(config["replicate"], "mv-pca", mv_report)

    metrics_path = os.path.join(outdir, "metrics.csv")
    if config["append"] and os.path.exists(metrics_path):
        with open(metrics_path, "a", encoding="ascii") as handle:
            for replicate, label, metric, component, value in rows:
                comp = "" if component is None else str(int(component))
                handle.write(
                    f"{replicate},{label},{metric},{comp},{float(value)!r}\n"
                )
    else:
        serialize.write_metric_rows(metrics_path, rows)
    _write_manifest(outdir, "evaluate", config)
    return 0


# -- mesh-info --------------------------------------------------------


def cmd_mesh_info(config) -> int:
    surface = _load_mesh_checked(_require(config, "mesh", "--mesh"))
    info = {
        "vertices": surface.K,
        "triangles": surface.T,
        "edges": surface.edge_count,
        "boundaryEdges": surface.boundary_edge_count,
        "closed": surface.is_closed(),
        "totalArea": surface.total_area(),
        "boundingBox": {
            "min": [float(v) for v in surface.vertices.min(axis=0)],
            "max": [float(v) for v in surface.vertices.max(axis=0)],
        },
    }
    json.dump(info, sys.stdout, indent=2, sort_keys=True)
    sys.stdout.write("\n")
    return 0


# -- argument parsing -------------------------------------------------


def _add_common(sub):
    sub.add_argument("--config", help="JSON config file (or a manifest)")
    sub.add_argument("--outdir", help="output directory")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="smfpca",
        description="Smoothed functional principal components on "
        "triangulated surfaces",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fit", help="extract principal components")
    _add_common(p)
    p.add_argument("--mesh", help="surface mesh (OFF)")
    p.add_argument("--data", help="data CSV, one row per function")
    p.add_argument("--n-components", type=int, dest="n_components")
    p.add_argument(
        "--lambda-grid", type=_float_list, dest="lambda_grid",
        help="comma-separated candidate smoothing parameters",
    )
    p.add_argument("--selection", choices=["kfold", "gcv", "fixed"])
    p.add_argument("--folds", type=int)
    p.add_argument("--fixed-lambda", type=float, dest="fixed_lambda")
    p.add_argument(
        "--center", dest="center", action="store_const", const=True,
        help="subtract the mean field (default)",
    )
    p.add_argument(
        "--no-center", dest="center", action="store_const", const=False,
        help="skip mean-field centering",
    )
    p.add_argument("--max-iterations", type=int, dest="max_iterations")
    p.add_argument("--tolerance", type=float)
    p.add_argument("--seed", type=int)
    p.add_argument("--threads", type=int)
    p.add_argument(
        "--export-matrices", dest="export_matrices", action="store_const",
        const=True, help="also write mass/stiffness/psi in MatrixMarket form",
    )
    p.set_defaults(func=cmd_fit, defaults=_FIT_DEFAULTS)

    p = sub.add_parser("simulate", help="generate a synthetic dataset")
    _add_common(p)
    p.add_argument("--generator", choices=["eigen", "sphere", "misaligned"])
    p.add_argument("--mesh", help="surface mesh (OFF)")
    p.add_argument(
        "--sphere", type=int,
        help="generate a unit icosphere with this many subdivisions",
    )
    p.add_argument("--n", type=int, help="number of functions")
    p.add_argument("--noise", type=float, help="observation noise sigma")
    p.add_argument("--seed", type=int)
    p.add_argument(
        "--sigmas", type=_float_list,
        help="comma-separated component score sigmas",
    )
    p.add_argument(
        "--eigen-indices", type=_int_list, dest="eigen_indices",
        help="eigenfunction indices for the eigen generator",
    )
    p.add_argument(
        "--shift-set", type=_float_list, dest="shift_set",
        help="candidate angular shifts for the misaligned generator",
    )
    p.set_defaults(func=cmd_simulate, defaults=_SIMULATE_DEFAULTS)

    p = sub.add_parser("evaluate", help="score a fit against truth")
    _add_common(p)
    p.add_argument("--result", help="result JSON from fit")
    p.add_argument("--truth", help="truth JSON from simulate")
    p.add_argument(
        "--mesh", help="surface mesh, needed for the multivariate baseline"
    )
    p.add_argument(
        "--data",
        help="data CSV; when given, also score the multivariate PCA baseline",
    )
    p.add_argument("--replicate", type=int, help="replicate label for rows")
    p.add_argument("--method-label", dest="method_label")
    p.add_argument(
        "--append", dest="append", action="store_const", const=True,
        help="append to an existing metrics.csv instead of rewriting",
    )
    p.set_defaults(func=cmd_evaluate, defaults=_EVALUATE_DEFAULTS)

    p = sub.add_parser("mesh-info", help="print mesh statistics as JSON")
    p.add_argument("--config", help="JSON config file")
    p.add_argument("--mesh", help="surface mesh (OFF)")
    p.set_defaults(
        func=cmd_mesh_info, defaults={"mesh": None}, outdir=None
    )

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        config = _resolve(args, args.defaults)
        return args.func(config)
    except FileNotFoundError as exc:
        name = exc.filename if exc.filename else exc
        print(f"smfpca: error: file not found: {name}", file=sys.stderr)
        return 2
    except InputError as exc:
        print(f"smfpca: error: {exc}", file=sys.stderr)
        return 2
    except NumericalError as exc:
        print(f"smfpca: numerical error: {exc}", file=sys.stderr)
        return 3


def entry():
    sys.exit(main())


if __name__ == "__main__":
    entry()
