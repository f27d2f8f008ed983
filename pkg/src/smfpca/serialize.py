"""File formats: result JSON, data CSV, truth JSON, run manifests.

All writers are deterministic (sorted keys, shortest-roundtrip float
text), so re-running an identical configuration reproduces output files
byte for byte.
"""

import json

import numpy as np

from .errors import DimensionMismatch, InputError, ParseError


def _float_list(values):
    return [float(v) for v in np.asarray(values).ravel()]


def _finite_or_none(values):
    return [float(v) if np.isfinite(v) else None for v in np.asarray(values).ravel()]


def trace_to_dict(trace):
    if trace is None:
        return None
    doc = {
        "method": trace.method,
        "lambdaGrid": _float_list(trace.lambda_grid),
        "scores": _finite_or_none(trace.scores),
        "chosen": int(trace.chosen),
        "chosenLambda": float(trace.lambda_grid[trace.chosen]),
    }
    if trace.history is not None:
        doc["history"] = _float_list(trace.history)
    return doc


def result_to_dict(result):
    """The result JSON document: components with their selection traces,
    variance accounting, and the centering field."""
    components = []
    for comp, trace in zip(result.components, result.selection_traces):
        components.append(
            {
                "lambda": float(comp.lam),
                "functionNorm": float(comp.function_norm),
                "iterations": int(comp.iterations),
                "scores": _float_list(comp.scores),
                "vertexValues": _float_list(comp.f_coefficients),
                "gCoefficients": _float_list(comp.g_coefficients),
                "objectiveTrace": _float_list(comp.objective_trace),
                "selection": trace_to_dict(trace),
            }
        )
    return {
        "components": components,
        "adjustedVariance": _float_list(result.adjusted_variance),
        "cumulativeVariance": _float_list(result.cumulative_variance),
        "meanField": None if result.mean_field is None
        else _float_list(result.mean_field),
    }


def report_to_dict(report):
    return {
        "pcFunctionMse": _float_list(report.pc_function_mse),
        "scoreMse": _float_list(report.score_mse),
        "signalMse": float(report.signal_mse),
        "principalAngle": float(report.principal_angle),
        "explainedVarianceCurve": _float_list(report.explained_variance_curve),
    }


def truth_to_dict(dataset):
    return {
        "generator": dataset.generator,
        "noiseSigma": float(dataset.noise_sigma),
        "seed": int(dataset.seed),
        "trueComponents": [
            _float_list(dataset.true_components[:, l])
            for l in range(dataset.true_components.shape[1])
        ],
        "trueScores": [
            _float_list(row) for row in np.asarray(dataset.true_scores)
        ],
    }


def write_json(path, document):
    with open(path, "w", encoding="ascii") as handle:
        json.dump(document, handle, indent=2, sort_keys=True)
        handle.write("\n")


def load_json(path):
    try:
        with open(path, "r", encoding="utf-8") as handle:
            return json.load(handle)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: invalid JSON: {exc}") from None


# -- data matrices ----------------------------------------------------


def write_data_csv(path, values, header: bool = True):
    """One row per function, one column per location; NaN entries become
    empty cells (partially observed data)."""
    values = np.asarray(values, dtype=np.float64)
    if values.ndim != 2:
        raise DimensionMismatch("data matrix must be 2-d")
    lines = []
    if header:
        lines.append(",".join(str(j) for j in range(values.shape[1])))
    for row in values:
        lines.append(
            ",".join("" if np.isnan(x) else repr(float(x)) for x in row)
        )
    with open(path, "w", encoding="ascii") as handle:
        handle.write("\n".join(lines) + "\n")


def _is_index_header(cells):
    try:
        numbers = [int(c) for c in cells]
    except ValueError:
        return False
    return numbers == list(range(len(cells)))


def read_data_csv(path):
    """Read a data matrix; empty cells come back as NaN.

    An optional first row of consecutive location indices (0, 1, ...)
    is recognized as a header and skipped. Malformed cells raise
    :class:`ParseError` naming the row and column.
    """
    with open(path, "r", encoding="utf-8") as handle:
        raw = handle.read().splitlines()
    rows = []
    width = None
    first_data_line = None
    for lineno, line in enumerate(raw, start=1):
        if not line.strip():
            continue
        cells = [c.strip() for c in line.split(",")]
        if width is None:
            width = len(cells)
            if _is_index_header(cells):
                continue
            first_data_line = lineno
        elif len(cells) != width:
            raise ParseError(
                f"row at line {lineno} has {len(cells)} cells, expected {width}"
            )
        if first_data_line is None:
            first_data_line = lineno
        parsed = np.empty(width)
        for col, cell in enumerate(cells):
            if cell == "":
                parsed[col] = np.nan
                continue
            try:
                parsed[col] = float(cell)
            except ValueError:
                raise ParseError(
                    f"non-numeric value {cell!r} at row {lineno}, "
                    f"column {col + 1}"
                ) from None
        rows.append(parsed)
    if not rows:
        raise ParseError(f"{path}: no data rows")
    return np.stack(rows, axis=0)


def write_matrix_csv(path, matrix, prefix: str):
    """Columns labeled ``<prefix>_1..m``; one row per index."""
    matrix = np.atleast_2d(np.asarray(matrix, dtype=np.float64))
    header = ",".join(f"{prefix}_{j + 1}" for j in range(matrix.shape[1]))
    lines = [header]
    for row in matrix:
        lines.append(",".join(repr(float(x)) for x in row))
    with open(path, "w", encoding="ascii") as handle:
        handle.write("\n".join(lines) + "\n")


def write_metric_rows(path, rows):
    """Long-format metric rows: replicate, method, metric, component,
    value. Component is empty for aggregate metrics."""
    lines = ["replicate,method,metric,component,value"]
    for replicate, method, metric, component, value in rows:
        comp = "" if component is None else str(int(component))
        lines.append(f"{replicate},{method},{metric},{comp},{float(value)!r}")
    with open(path, "w", encoding="ascii") as handle:
        handle.write("\n".join(lines) + "\n")


# -- loaded documents -------------------------------------------------


def arrays_from_result(document):
    """Vertex values, scores, and norms from a result JSON document."""
    comps = document.get("components")
    if not comps:
        raise InputError("result document holds no components")
    values = np.stack(
        [np.asarray(c["vertexValues"], dtype=np.float64) for c in comps], axis=1
    )
    scores = np.stack(
        [np.asarray(c["scores"], dtype=np.float64) for c in comps], axis=1
    )
    norms = np.asarray([c["functionNorm"] for c in comps], dtype=np.float64)
    curve = document.get("cumulativeVariance", [])
    return values, scores, norms, curve


def arrays_from_truth(document):
    comps = document.get("trueComponents")
    scores = document.get("trueScores")
    if not comps or scores is None:
        raise InputError("truth document lacks components or scores")
    values = np.stack(
        [np.asarray(c, dtype=np.float64) for c in comps], axis=1
    )
    return values, np.asarray(scores, dtype=np.float64)
