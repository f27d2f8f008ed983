"""Smoothing-parameter selection: K-fold cross-validation and GCV.

K-fold selection partitions the functions (data rows) into seeded,
near-equal groups, fits each candidate parameter on the training rows,
and scores validation rows with unnormalized scores computed from the
unnormalized fitted profile. GCV scores the smoothing of the projected
data vector through the trace of the smoother matrix, computed exactly
by blocked solves for moderate location counts and by a seeded
Hutchinson estimator beyond that.
"""

import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import solver
from .errors import DegenerateSmoother, DimensionMismatch, InputError, InvalidFoldCount
from .fem import FemOperators, l2_inner

# Above this location count, exact smoother traces give way to a
# stochastic estimate.
EXACT_TRACE_LIMIT = 2000
_HUTCHINSON_PROBES = 64
_TRACE_BLOCK = 512


@dataclass(eq=False)
class SelectionTrace:
    """Grid, scores, and choice of one selection run.

    ``chosen`` is the index of the smallest score (first index on
    ties). For per-iteration GCV, ``history`` lists the parameter
    chosen at each alternation; the last entry is the one kept.
    """

    lambda_grid: np.ndarray
    scores: np.ndarray
    chosen: int
    method: str
    history: list = None


def make_folds(n: int, folds: int, seed):
    """Seeded partition of ``range(n)`` into near-equal groups."""
    if not 2 <= folds <= n:
        raise InvalidFoldCount(
            f"fold count must lie in [2, {n}] for {n} functions, got {folds}"
        )
    perm = np.random.default_rng(seed).permutation(n)
    return np.array_split(perm, folds)


def _map_ordered(fn, items, threads):
    if threads and threads > 1 and len(items) > 1:
        with ThreadPoolExecutor(max_workers=int(threads)) as pool:
            return list(pool.map(fn, items))
    return [fn(item) for item in items]


def _checked_grid(lambda_grid):
    grid = np.asarray(lambda_grid, dtype=np.float64).ravel()
    if grid.size == 0:
        raise InputError("lambda grid is empty")
    if not (grid > 0).all():
        raise InputError("lambda grid entries must be positive")
    return grid


def default_lambda_grid(ops: FemOperators, count: int = 13,
                        low: float = 1e-6, high: float = 1e2):
    """Log-spaced grid scaled to the operator magnitudes.

    The raw span is multiplied by the ratio of the data-term trace to a
    lumped-mass surrogate of the penalty-term trace, so the grid
    brackets the bias-variance transition regardless of mesh scale.
    """
    data_trace = float((ops.psi.data ** 2).sum())
    lumped = np.asarray(ops.mass.sum(axis=1)).ravel()
    squared = ops.stiffness.copy()
    squared.data = squared.data ** 2
    column_sums = np.asarray(squared.sum(axis=0)).ravel()
    penalty_trace = float((column_sums / lumped).sum())
    if penalty_trace <= 0 or data_trace <= 0:
        raise InputError("operators give a degenerate grid scale")
    scale = data_trace / penalty_trace
    return scale * np.logspace(np.log10(low), np.log10(high), count)


# -- K-fold cross-validation ------------------------------------------


def kfold_select(X, lambda_grid, folds, ops: FemOperators, seed=0,
                 systems=None, max_iterations: int = 15,
                 tolerance: float = 1e-6, threads: int = 1) -> SelectionTrace:
    """Choose the smoothing parameter by K-fold cross-validation.

    For each candidate and fold, one component is fitted to the
    training rows and validation rows receive unnormalized scores
    (data projection divided by the profile norm plus the weighted
    penalty). Accumulated squared validation residuals, averaged over
    all matrix entries, score the candidate; the smallest wins.

    Parameters
    ----------
    X : DataMatrix
    lambda_grid : array_like of positive floats
    folds : int
        Between 2 and the function count.
    ops : FemOperators
    seed
        Seeds the fold shuffle only; the grid is always evaluated in
        full.
    systems : dict, optional
        Shared cache mapping lambda to a factored system.
    threads : int
        Candidates evaluated concurrently; scores are identical for
        any thread count.
    """
    from .estimator import DataMatrix, data_gram, fit_component, penalty_value

    grid = _checked_grid(lambda_grid)
    assignments = make_folds(X.n, folds, seed)
    if systems is None:
        systems = {}
    gram = data_gram(ops)
    for lam in grid:
        if float(lam) not in systems:
            systems[float(lam)] = solver.build(ops, gram, float(lam))

    row_sets = [
        (np.setdiff1d(np.arange(X.n), val_rows), val_rows)
        for val_rows in assignments
    ]

    def score_one(lam):
        lam = float(lam)
        system = systems[lam]
        total = 0.0
        for train_rows, val_rows in row_sets:
            train = DataMatrix(X.values[train_rows], centered=X.centered)
            comp = fit_component(
                train, lam, ops, system=system,
                max_iterations=max_iterations, tolerance=tolerance,
            )
            f_un = comp.function_norm * comp.f_coefficients
            g_un = comp.function_norm * comp.g_coefficients
            profile = ops.psi @ f_un
            denom = float(profile @ profile) + lam * penalty_value(g_un, ops)
            validation = X.values[val_rows]
            if denom > 0:
                u_val = (validation @ profile) / denom
            else:
                u_val = np.zeros(len(val_rows))
            resid = validation - np.outer(u_val, profile)
            total += float(np.dot(resid.ravel(), resid.ravel()))
        return total / (X.n * X.s)

    scores = np.array(_map_ordered(score_one, list(grid), threads))
    return SelectionTrace(
        lambda_grid=grid, scores=scores,
        chosen=int(np.argmin(scores)), method="kfold",
    )


def kfold_select_missing(state, lambda_grid, folds, ops: FemOperators,
                         seed=0, max_iterations: int = 15,
                         tolerance: float = 1e-6,
                         threads: int = 1) -> SelectionTrace:
    """K-fold selection over per-function observation lists.

    The validation score of function i divides its observation/profile
    inner product by that function's own profile energy plus the
    weighted penalty; residuals run over observed entries only and are
    averaged over the total observation count.
    """
    from .estimator import _fit_component_missing, penalty_value

    grid = _checked_grid(lambda_grid)
    assignments = make_folds(state.n, folds, seed)
    row_sets = [
        (np.setdiff1d(np.arange(state.n), val_rows), val_rows)
        for val_rows in assignments
    ]

    def score_one(lam):
        lam = float(lam)
        total = 0.0
        for train_rows, val_rows in row_sets:
            train = state.subset(train_rows)
            comp = _fit_component_missing(
                train, lam, ops, max_iterations, tolerance
            )
            f_un = comp.function_norm * comp.f_coefficients
            g_un = comp.function_norm * comp.g_coefficients
            pen = lam * penalty_value(g_un, ops)
            for i in val_rows:
                evaluated = state.psis[i] @ f_un
                denom = float(evaluated @ evaluated) + pen
                inner = float(state.values[i] @ evaluated)
                u_i = inner / denom if denom > 0 else 0.0
                resid = state.values[i] - u_i * evaluated
                total += float(resid @ resid)
        return total / state.total_observations

    scores = np.array(_map_ordered(score_one, list(grid), threads))
    return SelectionTrace(
        lambda_grid=grid, scores=scores,
        chosen=int(np.argmin(scores)), method="kfold",
    )


# -- generalized cross-validation -------------------------------------


def gcv_select(X, u, lambda_grid, ops: FemOperators, systems=None,
               trace_cache=None, threads: int = 1,
               exact_trace_limit: int = EXACT_TRACE_LIMIT,
               probes: int = _HUTCHINSON_PROBES) -> SelectionTrace:
    """Choose the smoothing parameter by GCV on the regression step.

    The data vector is the projection of the data matrix onto the unit
    scores ``u``. Each candidate's score is the mean squared smoothing
    residual divided by (1 - trace(S)/s)^2, where S maps the data
    vector to the smoothed profile. Candidates whose trace gap closes
    to zero score +inf and are skipped with a warning.

    Raises
    ------
    DegenerateSmoother
        If no candidate earns a finite score.
    """
    from .estimator import data_gram

    grid = _checked_grid(lambda_grid)
    u = np.asarray(u, dtype=np.float64)
    if u.shape != (X.n,):
        raise DimensionMismatch(f"scores must have length {X.n}, got {u.shape}")
    z = X.values.T @ u
    s = X.s
    if systems is None:
        systems = {}
    if trace_cache is None:
        trace_cache = {}
    gram = data_gram(ops)
    for lam in grid:
        if float(lam) not in systems:
            systems[float(lam)] = solver.build(ops, gram, float(lam))

    rhs = ops.psi.T @ z

    def score_one(lam):
        lam = float(lam)
        system = systems[lam]
        f, _ = system.solve(rhs)
        resid = z - ops.psi @ f
        if lam not in trace_cache:
            trace_cache[lam] = _smoother_trace(
                system, ops, exact_trace_limit, probes
            )
        gap = 1.0 - trace_cache[lam] / s
        if gap <= 1e-12:
            warnings.warn(
                f"smoother trace reaches the location count at lambda "
                f"{lam:g}; assigning an infinite score",
                stacklevel=2,
            )
            return np.inf
        return (float(resid @ resid) / s) / gap**2

    scores = np.array(_map_ordered(score_one, list(grid), threads))
    if not np.isfinite(scores).any():
        raise DegenerateSmoother("every candidate produced an undefined score")
    return SelectionTrace(
        lambda_grid=grid, scores=scores,
        chosen=int(np.argmin(scores)), method="gcv",
    )


def _smoother_trace(system, ops: FemOperators, exact_limit, probes):
    """trace(S) for S = psi solve(psi' .): exact by blocked solves up to
    ``exact_limit`` locations, Hutchinson probing beyond."""
    s = ops.location_count
    psi_t = ops.psi.T.tocsc()
    if s <= exact_limit:
        total = 0.0
        for start in range(0, s, _TRACE_BLOCK):
            stop = min(start + _TRACE_BLOCK, s)
            block = np.asarray(psi_t[:, start:stop].todense())
            f_block, _ = system.solve_many(block)
            smoothed = ops.psi @ f_block
            total += float(
                smoothed[np.arange(start, stop), np.arange(stop - start)].sum()
            )
        return total
    rng = np.random.default_rng(1899)
    signs = rng.integers(0, 2, size=(s, probes)).astype(np.float64) * 2.0 - 1.0
    f_block, _ = system.solve_many(psi_t @ signs)
    smoothed = ops.psi @ f_block
    return float(np.einsum("sk,sk->", signs, smoothed)) / probes
