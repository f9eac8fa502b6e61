"""Lifted-space cross-checks: evolution families as semigroups in time.

States become trajectories: a lifted vector assigns a grid state to every
node of a truncated uniform time axis, normed by h * sum of node norms.
On that space the family acts by shift-plus-flow, the generator is
"-d/dt - loss rate" with an upwind difference and zero inflow at time 0,
and three identities tie the machinery together:

* the perturbed resolvent factorizes the free one through an
  exponentially discounted kick operator,
* the perturbed resolvent expands in a geometric series of free
  resolvents and kick blocks,
* the Laplace transform of the n-th lifted iterate equals the n-th term
  of that series.

All three are continuum identities; discretely they hold to O(h) (the
upwind difference is first order), which is exactly what the check suite
measures and reports, together with any horizon-truncation bound.
"""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import PreconditionError, StructureError
from .evolution import PerturbedModel, TimeGrid, iterate_right, prefix_weights, series_sum
from .state_space import Grid, weighted_norm_array

HORIZON_TAIL_LIMIT = 1e-10


@dataclass(frozen=True)
class LiftedVector:
    """A trajectory of grid states on a uniform time axis.

    ``values[k]`` is the state at axis node k; the axis must start at 0.
    """

    grid: Grid
    axis: TimeGrid
    values: np.ndarray

    def __post_init__(self):
        if self.axis.s != 0.0:
            raise StructureError("lifted time axis must start at 0")
        vals = np.asarray(self.values, dtype=float)
        expected = (self.axis.n_steps + 1, self.grid.size)
        if vals.shape != expected:
            raise StructureError(f"lifted values must have shape {expected}, got {vals.shape}")
        object.__setattr__(self, "values", vals)

    @property
    def h(self) -> float:
        return self.axis.dt

    def norm(self) -> float:
        return float(self.h * sum(weighted_norm_array(self.grid, row)
                                  for row in self.values))


def lifted_norm(f: LiftedVector) -> float:
    return f.norm()


def lifted_zero(grid: Grid, axis: TimeGrid) -> LiftedVector:
    return LiftedVector(grid=grid, axis=axis,
                        values=np.zeros((axis.n_steps + 1, grid.size)))


def _check_lifted(model: PerturbedModel, f: LiftedVector) -> None:
    if f.grid != model.grid:
        raise StructureError("lifted vector grid does not match the model grid")


def _shift_index(axis: TimeGrid, t: float) -> int:
    if t < 0.0:
        raise PreconditionError(f"shift must be nonnegative, got {t}")
    return axis.node_index(axis.s + t)


def _loss_rates(model: PerturbedModel, t: float) -> np.ndarray:
    if model.loss_rate is None:
        raise PreconditionError(
            "model must provide loss_rate for the lifted generator"
        )
    rates = np.asarray(model.loss_rate(t), dtype=float)
    if rates.shape != (model.grid.size,):
        raise PreconditionError("loss_rate must return one value per grid node")
    return rates


# ---------------------------------------------------------------------------
# lifted semigroups
# ---------------------------------------------------------------------------

def apply_lifted_free(model: PerturbedModel, t: float, f: LiftedVector) -> LiftedVector:
    """Free lifted action: node r receives U(r, r-t) f(r-t), zero for r < t.

    ``t`` must be an axis-lattice multiple (no interpolation).
    """
    _check_lifted(model, f)
    j = _shift_index(f.axis, t)
    nodes = f.axis.nodes
    out = np.zeros_like(f.values)
    for k in range(j, len(nodes)):
        out[k] = model.unperturbed.apply(nodes[k], nodes[k - j], f.values[k - j])
    return LiftedVector(grid=f.grid, axis=f.axis, values=out)


def apply_lifted_iterate(model: PerturbedModel, n: int, t: float,
                         f: LiftedVector) -> LiftedVector:
    """n-th lifted iterate: node r receives (iterate row n)(r, r-t) f(r-t).

    n = 0 reduces to the free action; every n >= 1 vanishes at t = 0.
    """
    _check_lifted(model, f)
    if n < 0:
        raise PreconditionError("iterate index must be >= 0")
    if n == 0:
        return apply_lifted_free(model, t, f)
    j = _shift_index(f.axis, t)
    nodes = f.axis.nodes
    out = np.zeros_like(f.values)
    if j == 0:
        return LiftedVector(grid=f.grid, axis=f.axis, values=out)
    for k in range(j, len(nodes)):
        sub = TimeGrid(nodes[k - j], nodes[k], f.axis.dt, f.axis.rule)
        table = iterate_right(model, sub, f.values[k - j], n)
        out[k] = table.iterates[n, j]
    return LiftedVector(grid=f.grid, axis=f.axis, values=out)


def apply_lifted_series(model: PerturbedModel, t: float, f: LiftedVector, *,
                        tol: float = 1e-12, n_max: int = 40) -> LiftedVector:
    """Summed lifted action: node r receives (summed family)(r, r-t) f(r-t)."""
    _check_lifted(model, f)
    j = _shift_index(f.axis, t)
    nodes = f.axis.nodes
    out = np.zeros_like(f.values)
    for k in range(j, len(nodes)):
        if j == 0:
            out[k] = f.values[k]
            continue
        sub = TimeGrid(nodes[k - j], nodes[k], f.axis.dt, f.axis.rule)
        out[k] = series_sum(model, sub, f.values[k - j], tol=tol, n_max=n_max).value
    return LiftedVector(grid=f.grid, axis=f.axis, values=out)


# ---------------------------------------------------------------------------
# discounted kick operator and resolvents
# ---------------------------------------------------------------------------

def laplace_kick(model: PerturbedModel, lam: float, f: LiftedVector) -> LiftedVector:
    """Exponentially discounted kick of the trajectory history.

    At axis node s the output is the trapezoid quadrature over tau in
    [0, s] of exp(-lam (s - tau)) B(s) U(s, tau) f(tau): free transport of
    the history into s, discounted at rate lam, then kicked once.  The
    accumulator form below is the nested-prefix evaluation of that
    quadrature (exact for composing U).
    """
    _check_lifted(model, f)
    if lam <= 0.0:
        raise PreconditionError("lam must be positive")
    nodes = f.axis.nodes
    h = f.axis.dt
    half = 0.5 * h
    decay = math.exp(-lam * h)
    out = np.zeros_like(f.values)
    acc = np.zeros(f.grid.size)
    for k, tau in enumerate(nodes):
        if k > 0:
            acc = decay * model.unperturbed.apply(tau, nodes[k - 1],
                                                  acc + half * f.values[k - 1])
            acc = acc + half * f.values[k]
            out[k] = model.perturbation.apply(tau, acc)
    return LiftedVector(grid=f.grid, axis=f.axis, values=out)


def lifted_resolvent(model: PerturbedModel, lam: float, f: LiftedVector, *,
                     perturbed: bool = False) -> LiftedVector:
    """Solve (lam - generator) g = f by forward substitution.

    The generator is -d/dt - loss_rate(t) (upwind backward difference,
    zero inflow at time 0), optionally plus the kick block B(t).  The
    upwind structure makes the system block-lower-bidiagonal, so one
    sweep along the axis solves it; each diagonal block is an M-matrix
    for lam > 0, so nonnegative data produce nonnegative solutions.
    """
    _check_lifted(model, f)
    if lam <= 0.0:
        raise PreconditionError("lam must be positive")
    nodes = f.axis.nodes
    h = f.axis.dt
    d = f.grid.size
    out = np.zeros_like(f.values)
    prev = np.zeros(d)
    for k, tau in enumerate(nodes):
        rates = _loss_rates(model, tau)
        diag = lam + 1.0 / h + rates
        if np.any(diag <= 0.0):
            raise PreconditionError("generator diagonal must be positive for lam > 0")
        rhs = f.values[k] + prev / h
        if perturbed:
            block = np.diag(diag) - model.perturbation.as_matrix(tau)
            out[k] = np.linalg.solve(block, rhs)
        else:
            out[k] = rhs / diag
        prev = out[k]
    return LiftedVector(grid=f.grid, axis=f.axis, values=out)


def lifted_generator_matrix(model: PerturbedModel, axis: TimeGrid, *,
                            perturbed: bool = False) -> np.ndarray:
    """Dense generator over the (time-node, grid-node) index set.

    Row-major ordering: unknown index k * d + i for axis node k and grid
    node i.  Intended for small-scale structure tests; the solver never
    materializes this.
    """
    nodes = axis.nodes
    h = axis.dt
    d = model.grid.size
    size = len(nodes) * d
    mat = np.zeros((size, size))
    eye = np.eye(d)
    for k, tau in enumerate(nodes):
        rates = _loss_rates(model, tau)
        block = -np.diag(1.0 / h + rates)
        if perturbed:
            block = block + model.perturbation.as_matrix(tau)
        mat[k * d:(k + 1) * d, k * d:(k + 1) * d] = block
        if k > 0:
            mat[k * d:(k + 1) * d, (k - 1) * d:k * d] = eye / h
    return mat


def kick_block_norm(model: PerturbedModel, axis: TimeGrid) -> float:
    """Weighted-norm bound of the kick blocks over the axis nodes.

    max over nodes t of the induced norm of B(t) on the weighted space:
    max_j sum_i w_i |B_ij| / w_j.
    """
    w = model.grid.weights
    worst = 0.0
    for tau in axis.nodes:
        mat = np.abs(model.perturbation.as_matrix(tau))
        worst = max(worst, float(np.max((w @ mat) / w)))
    return worst


# ---------------------------------------------------------------------------
# identity checks
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CheckRow:
    """One check-suite entry: residual plus its horizon-truncation bound."""

    check_name: str
    h: float
    lam: float
    n: int
    residual: float
    truncation_bound: float


def resolvent_factorization_check(model: PerturbedModel, lam: float,
                                  f: LiftedVector) -> CheckRow:
    """Residual of: perturbed resolvent of (discounted kick of f)
    minus perturbed resolvent of f plus free resolvent of f.

    The continuum combination vanishes identically (insert the
    variation-of-constants identity under the Laplace integral); on the
    axis it is O(h) from the upwind difference.  No horizon truncation
    enters: resolvents and kick only look backward in time.
    """
    kicked = laplace_kick(model, lam, f)
    left = lifted_resolvent(model, lam, kicked, perturbed=True)
    mid = lifted_resolvent(model, lam, f, perturbed=True)
    right = lifted_resolvent(model, lam, f, perturbed=False)
    residual = LiftedVector(grid=f.grid, axis=f.axis,
                            values=left.values - mid.values + right.values).norm()
    return CheckRow(check_name="resolvent_factorization", h=f.axis.dt,
                    lam=lam, n=0, residual=residual, truncation_bound=0.0)


def _kick_blockwise(model: PerturbedModel, f: LiftedVector) -> LiftedVector:
    out = np.zeros_like(f.values)
    for k, tau in enumerate(f.axis.nodes):
        out[k] = model.perturbation.apply(tau, f.values[k])
    return LiftedVector(grid=f.grid, axis=f.axis, values=out)


def resolvent_series_check(model: PerturbedModel, lam: float, f: LiftedVector,
                           n_terms: int) -> np.ndarray:
    """Residuals of the geometric resolvent expansion, one per truncation.

    Entry n is the lifted norm of (perturbed resolvent of f) minus the
    partial sum over k <= n of (free resolvent (kick free resolvent)^k) f.
    The discrete expansion is an exact matrix identity, so the residuals
    decay geometrically with ratio about (kick norm)/lam; a ratio
    estimate >= 1 triggers a warning because no convergence is then
    claimed.
    """
    if n_terms < 0:
        raise PreconditionError("n_terms must be >= 0")
    ratio = kick_block_norm(model, f.axis) / lam
    if ratio >= 1.0:
        warnings.warn(
            f"kick-norm/lam ratio {ratio:.3f} >= 1: the resolvent expansion "
            "carries no convergence claim", stacklevel=2)
    target = lifted_resolvent(model, lam, f, perturbed=True)
    residuals = np.zeros(n_terms + 1)
    partial = np.zeros_like(f.values)
    term = lifted_resolvent(model, lam, f, perturbed=False)
    for n in range(n_terms + 1):
        partial = partial + term.values
        residuals[n] = LiftedVector(grid=f.grid, axis=f.axis,
                                    values=target.values - partial).norm()
        if n < n_terms:
            term = lifted_resolvent(model, lam, _kick_blockwise(model, term),
                                    perturbed=False)
    return residuals


def required_horizon(lam: float, tail: float = HORIZON_TAIL_LIMIT) -> float:
    """Shortest axis end time whose Laplace tail weight drops below ``tail``."""
    return math.log(1.0 / tail) / lam


def laplace_transform_check(model: PerturbedModel, lam: float, n: int,
                            f: LiftedVector) -> CheckRow:
    """Laplace transform of the n-th lifted iterate against the series term.

    Left side: trapezoid quadrature over t in [0, T_max] of
    exp(-lam t) (n-th lifted iterate at t) f.  Right side: free resolvent
    applied after n rounds of (kick, free resolvent).  Equal in the
    continuum; O(h) on the axis, plus the reported horizon-truncation
    bound exp(-lam T_max)/lam * norm(f).  The axis must satisfy
    exp(-lam T_max) < 1e-10 (raises with the required horizon).
    """
    _check_lifted(model, f)
    if lam <= 0.0:
        raise PreconditionError("lam must be positive")
    if n < 0:
        raise PreconditionError("iterate index must be >= 0")
    t_max = f.axis.t_end
    if math.exp(-lam * t_max) >= HORIZON_TAIL_LIMIT:
        raise PreconditionError(
            f"time horizon {t_max} too short for lam = {lam}; "
            f"need T_max >= {required_horizon(lam):.3f}"
        )
    axis = f.axis
    nodes = axis.nodes
    m = axis.n_steps
    weights = prefix_weights("trapezoid", m, axis.dt)
    discount = weights * np.exp(-lam * (nodes - axis.s))

    # One engine run per start node i gives iterate rows at every later
    # node; the shift-action value of the t = nodes[j] term at axis node
    # k is then runs[k - j][n, j], accumulated per start index below.
    lhs = np.zeros_like(f.values)
    for i in range(len(nodes)):
        sub = TimeGrid(nodes[i], nodes[-1], axis.dt, axis.rule)
        if n == 0:
            row = np.empty((m - i + 1, f.grid.size))
            row[0] = f.values[i]
            for j in range(1, m - i + 1):
                row[j] = model.unperturbed.apply(nodes[i + j], nodes[i + j - 1], row[j - 1])
        else:
            row = iterate_right(model, sub, f.values[i], n).iterates[n]
        lhs[i:] += discount[:m - i + 1, None] * row

    rhs = lifted_resolvent(model, lam, f, perturbed=False)
    for _ in range(n):
        rhs = lifted_resolvent(model, lam, _kick_blockwise(model, rhs),
                               perturbed=False)
    residual = LiftedVector(grid=f.grid, axis=axis,
                            values=lhs - rhs.values).norm()
    bound = math.exp(-lam * t_max) / lam * f.norm()
    return CheckRow(check_name="laplace_transform", h=axis.dt, lam=lam, n=n,
                    residual=residual, truncation_bound=bound)


def lifted_duhamel_residual(model: PerturbedModel, t: float, f: LiftedVector, *,
                            tol: float = 1e-12, n_max: int = 40) -> float:
    """Variation-of-constants residual of the summed lifted action.

    Lifted norm of (summed action at t) f - (free action at t) f -
    prefix quadrature over s of (summed action at t-s)(blockwise kick)
    (free action at s) f.  Bounded by the lattice quadrature error; on
    the trapezoid rule the quadrature telescopes against the series
    construction, so the residual lands at rounding level (truncation
    tolerance aside), mirroring the flat-space identity checks.
    """
    _check_lifted(model, f)
    axis = f.axis
    j = _shift_index(axis, t)
    full = apply_lifted_series(model, t, f, tol=tol, n_max=n_max)
    free = apply_lifted_free(model, t, f)
    integral = np.zeros_like(f.values)
    if j > 0:
        w = prefix_weights(axis.rule, j, axis.dt)
        for i in range(j + 1):
            inner = apply_lifted_free(model, axis.nodes[i], f)
            kicked = _kick_blockwise(model, inner)
            outer = apply_lifted_series(model, t - axis.nodes[i], kicked,
                                        tol=tol, n_max=n_max)
            integral += w[i] * outer.values
    return LiftedVector(grid=f.grid, axis=axis,
                        values=full.values - free.values - integral).norm()


def write_check_suite_csv(path, rows) -> None:
    """Write check rows as CSV: check_name, h, lambda, n, residual, truncation_bound."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["check_name", "h", "lambda", "n", "residual",
                         "truncation_bound"])
        for row in rows:
            writer.writerow([row.check_name, repr(row.h), repr(row.lam),
                             row.n, repr(row.residual), repr(row.truncation_bound)])
