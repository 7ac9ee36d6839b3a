"""Hybrid forward-backward / alternating halfspace projection solver.

Solves ``0 in A_i(x) + B_i(x)`` for every component ``i`` of a system. Each
outer iteration sweeps the components in order; component ``i`` evaluates its
forward-backward point once, backtracks along the segment towards it until a
separating inequality holds, and then projects the running point onto the
resulting halfspace followed by the constraint set ``X``.

A fixed-step forward-backward iteration is included as a comparator.
"""

import math
import time
import warnings
from dataclasses import dataclass, field
from typing import Callable, Optional, Union

import numpy as np

from .errors import ConfigurationError, DomainError, InvariantViolation, LinesearchFailure
from .geometry import ZERO_NORMAL, project_halfspace
from .operators import forward_backward_map, forward_backward_point

__all__ = [
    "AlgoParams", "LinesearchResult", "ComponentStep", "SolveTrace", "SolveResult",
    "residual", "linesearch", "component_step", "solve", "solve_baseline_fb",
]

# slacks used by the run-time invariant checks
FEJER_SLACK = 1e-10
CONTAINMENT_SLACK = 1e-9
ACCEPT_SLACK = 1e-10
IN_X_SLACK = 1e-10

_GEOMETRIC_PERIOD = 10


@dataclass(frozen=True)
class AlgoParams:
    """Tuning constants of :func:`solve`.

    ``beta_schedule`` is ``"midpoint"`` (constant midpoint of the bounds),
    ``"geometric"`` (cycles geometrically from ``beta_lo`` to ``beta_hi``
    every 10 iterations), a float (constant), or a callable ``k -> beta``.
    Any value it produces must lie in ``[beta_lo, beta_hi]``.
    ``radius=None`` defers to the instance's radius.
    """

    beta_lo: float = 0.1
    beta_hi: float = 1.0
    beta_schedule: Union[str, float, Callable[[int], float]] = "midpoint"
    theta: float = 0.5
    delta: float = 0.5
    radius: Optional[float] = None
    tol_component: float = 1e-9
    tol_outer: float = 1e-6
    max_outer: int = 100_000
    max_linesearch: int = 60

    def __post_init__(self):
        if not (0 < self.beta_lo <= self.beta_hi < math.inf):
            raise ConfigurationError(f"need 0 < beta_lo <= beta_hi < inf, got [{self.beta_lo}, {self.beta_hi}]")
        for name in ("theta", "delta"):
            v = getattr(self, name)
            if not 0 < v < 1:
                raise ConfigurationError(f"{name} must lie in (0, 1), got {v}")
        if self.radius is not None and not self.radius > 0:
            raise ConfigurationError("radius must be positive")
        if not (self.tol_component > 0 and self.tol_outer > 0):
            raise ConfigurationError("tolerances must be positive")
        if int(self.max_outer) < 1 or int(self.max_linesearch) < 1:
            raise ConfigurationError("iteration caps must be positive integers")
        if isinstance(self.beta_schedule, str):
            if self.beta_schedule not in ("midpoint", "geometric"):
                raise ConfigurationError(f"unknown beta schedule {self.beta_schedule!r}")
        elif not callable(self.beta_schedule):
            self._check_beta(float(self.beta_schedule))

    @property
    def beta_mid(self):
        return 0.5 * (self.beta_lo + self.beta_hi)

    def _check_beta(self, beta):
        if not self.beta_lo <= beta <= self.beta_hi:
            raise ConfigurationError(f"beta={beta} outside [{self.beta_lo}, {self.beta_hi}]")
        return beta

    def beta(self, k):
        s = self.beta_schedule
        if s == "midpoint":
            return self.beta_mid
        if s == "geometric":
            t = (k % _GEOMETRIC_PERIOD) / (_GEOMETRIC_PERIOD - 1)
            return self.beta_lo * (self.beta_hi / self.beta_lo) ** t
        if callable(s):
            return self._check_beta(float(s(k)))
        return float(s)

    def schedule_label(self):
        s = self.beta_schedule
        return getattr(s, "__name__", "callable") if callable(s) else str(s)


@dataclass
class LinesearchResult:
    j: int
    alpha: float
    u_bar: np.ndarray
    x_bar: np.ndarray
    lhs: float
    rhs: float
    domain_skips: int = 0


@dataclass
class ComponentStep:
    z_next: np.ndarray
    solved: bool
    linesearch: Optional[LinesearchResult]
    residual: float
    J: np.ndarray
    normal: Optional[np.ndarray] = None

    @property
    def j_count(self):
        return 0 if self.linesearch is None else self.linesearch.j + 1


@dataclass
class SolveTrace:
    """Append-only per-iteration log of a run.

    Row ``k`` describes iterate ``x^k``: its residual, its distance to the
    known solution, the step size and linesearch work of the sweep that
    started from it, and the wall-clock time since the run started.
    The ``*_margin`` columns hold the worst value of each run-time check over
    the sweep (positive means violated), or NaN where not applicable.
    """

    iterates: list = field(default_factory=list)
    residuals: list = field(default_factory=list)
    dist_to_star: list = field(default_factory=list)
    betas: list = field(default_factory=list)
    component_residuals: list = field(default_factory=list)
    linesearch_j: list = field(default_factory=list)
    linesearch_total: list = field(default_factory=list)
    displacement: list = field(default_factory=list)
    fejer_margin: list = field(default_factory=list)
    chain_margin: list = field(default_factory=list)
    containment_margin: list = field(default_factory=list)
    accept_margin: list = field(default_factory=list)
    time_ms: list = field(default_factory=list)

    CSV_COLUMNS = ("k", "residual", "dist_to_star", "beta", "linesearch_total", "time_ms")

    def __len__(self):
        return len(self.residuals)

    def rows(self):
        for k in range(len(self)):
            yield (k, self.residuals[k], self.dist_to_star[k], self.betas[k],
                   self.linesearch_total[k], self.time_ms[k])

    def to_csv(self, path_or_file, include_time=True):
        import csv
        own = isinstance(path_or_file, (str, bytes)) or hasattr(path_or_file, "__fspath__")
        fh = open(path_or_file, "w", newline="", encoding="utf-8") if own else path_or_file
        try:
            cols = self.CSV_COLUMNS if include_time else self.CSV_COLUMNS[:-1]
            writer = csv.writer(fh)
            writer.writerow(cols)
            for row in self.rows():
                writer.writerow([_fmt(v) for v in row[:len(cols)]])
        finally:
            if own:
                fh.close()

    def max_linesearch_j(self):
        vals = [int(np.max(js)) for js in self.linesearch_j if len(js)]
        return max(vals, default=-1)


def _fmt(v):
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return repr(float(v))


@dataclass
class SolveResult:
    status: str
    x: np.ndarray
    trace: SolveTrace
    reason: str = ""
    iterations: int = 0
    error: Optional[Exception] = None

    @property
    def solved(self):
        return self.status == "solved"


def residual(instance, beta, x):
    """Largest forward-backward displacement ``||x - J_i(x)||`` over the components."""
    x = np.asarray(x, dtype=float)
    return max(float(np.linalg.norm(x - forward_backward_map(A, B, beta, x)))
               for A, B in instance.components)


def linesearch(A, B, z, J, beta, params, radius=None, hint=None):
    """Backtrack from ``J`` towards ``z`` until the separating inequality holds.

    Tries ``y_j = theta^j J + (1 - theta^j) z`` for ``j = 0, 1, ...`` with one
    forward evaluation and one selection ``u_j = B.selection(y_j, R, hint)``
    per trial, and accepts the first ``j`` with
    ``<A(y_j) + u_j, z - J> >= (delta/beta) ||z - J||^2``.
    Trial points outside the domain of ``B`` are skipped.

    ``hint`` should be the element of ``B(J)`` produced by the resolvent (see
    :func:`forward_backward_point`). At ``j = 0`` the selection then returns
    it exactly, which makes the halfspace normal vanish at solutions; the
    minimal-norm selection does not, and stalls on nonsmooth ``B``.
    """
    z = np.asarray(z, dtype=float)
    d = z - J
    dd = float(d @ d)
    if math.sqrt(dd) <= params.tol_component:
        raise ValueError("linesearch called on a component that is already solved")
    R = params.radius if params.radius is not None else radius
    if R is None:
        raise ConfigurationError("no selection radius given")
    rhs = params.delta / beta * dd
    skips = 0
    last_error = None
    for j in range(params.max_linesearch + 1):
        alpha = params.theta ** j
        y = alpha * J + (1.0 - alpha) * z
        try:
            u = B.selection(y, R, hint)
        except DomainError as exc:
            skips += 1
            last_error = exc
            continue
        lhs = float((A(y) + u) @ d)
        if lhs >= rhs:
            return LinesearchResult(j, alpha, u, y, lhs, rhs, skips)
    msg = f"no acceptable step within {params.max_linesearch} backtracks"
    if last_error is not None:
        msg += f" ({skips} trial points left the operator domain: {last_error})"
    raise LinesearchFailure(msg)


def component_step(A, B, X, z, beta, params, radius=None, fb=None):
    """One component update: forward-backward point, linesearch, double projection.

    ``fb`` may carry a precomputed ``forward_backward_point(A, B, beta, z)``.
    """
    z = np.asarray(z, dtype=float)
    J, v = forward_backward_point(A, B, beta, z) if fb is None else fb
    res = float(np.linalg.norm(z - J))
    if res <= params.tol_component:
        return ComponentStep(z, True, None, res, J)
    ls = linesearch(A, B, z, J, beta, params, radius, hint=v)
    w = A(ls.x_bar) + ls.u_bar
    if float(np.linalg.norm(w)) <= ZERO_NORMAL:
        return ComponentStep(z, True, ls, res, J, w)
    z_next = X.project(project_halfspace(w, ls.x_bar, z))
    return ComponentStep(z_next, False, ls, res, J, w)


def _check(verify, margin, what, k, i):
    if verify and margin > 0:
        where = f"iteration {k}" + ("" if i is None else f", component {i}")
        raise InvariantViolation(f"{what} violated at {where} (margin {margin:.3e})")


def solve(instance, params=None, x0=None, verify=False, known_solution=None,
          keep_iterates=True):
    """Run the hybrid splitting method on ``instance``.

    Parameters
    ----------
    instance : ProblemInstance
        Needs ``components`` (list of ``(A, B)``), ``X`` and ``radius``.
    params : AlgoParams, optional
    x0 : array_like, optional
        Starting point; projected onto ``X`` (with a warning) if outside.
        Defaults to ``instance.default_start()``.
    verify : bool
        Raise :class:`InvariantViolation` as soon as a run-time check fails.
        Checks that need a solution use ``known_solution`` (default: the
        instance's planted solution); the others always run.
    keep_iterates : bool
        Store every iterate in the trace.

    Returns
    -------
    SolveResult
        ``status`` is ``"solved"``, ``"max_iterations"`` or
        ``"linesearch_failure"``; ``reason`` tells which stopping test fired.
    """
    params = params or AlgoParams()
    X = instance.X
    comps = instance.components
    radius = getattr(instance, "radius", None)
    xstar = known_solution if known_solution is not None else getattr(instance, "known_solution", None)
    xstar = None if xstar is None else np.asarray(xstar, dtype=float)

    for note in instance.validate() if hasattr(instance, "validate") else ():
        warnings.warn(note, stacklevel=2)
    x = np.asarray(instance.default_start() if x0 is None else x0, dtype=float)
    if not X.contains(x, IN_X_SLACK):
        warnings.warn("starting point lies outside X; projecting it onto X", stacklevel=2)
        x = X.project(x)

    trace = SolveTrace()
    t0 = time.perf_counter()
    nan = math.nan

    def dist(p):
        return nan if xstar is None else float(np.linalg.norm(p - xstar))

    for k in range(params.max_outer + 1):
        beta = params.beta(k)
        fbs = [forward_backward_point(A, B, beta, x) for A, B in comps]
        r = max(float(np.linalg.norm(x - J)) for J, _ in fbs)
        trace.iterates.append(x.copy() if keep_iterates else None)
        trace.residuals.append(r)
        trace.dist_to_star.append(dist(x))
        trace.betas.append(beta)

        if r <= params.tol_component:
            # every component is fixed at x^k, so the sweep would leave x^k untouched
            _finish_row(trace, [r] * len(comps), [], 0.0, nan, nan, nan, t0)
            return SolveResult("solved", x, trace, "all_components_fixed", k)
        if r <= params.tol_outer:
            _finish_row(trace, [], [], 0.0, nan, nan, nan, t0)
            return SolveResult("solved", x, trace, "residual", k)
        if k == params.max_outer:
            _finish_row(trace, [], [], 0.0, nan, nan, nan, t0)
            return SolveResult("max_iterations", x, trace, "max_outer", k)

        z = x
        comp_res, js = [], []
        n_solved = 0
        chain_m = containment_m = accept_m = -math.inf
        for i, (A, B) in enumerate(comps):
            try:
                step = component_step(A, B, X, z, beta, params, radius,
                                      fb=fbs[0] if i == 0 else None)
            except LinesearchFailure as exc:
                exc.component, exc.iteration = i, k
                exc.args = (f"component {i}, iteration {k}: {exc.args[0]}",)
                _finish_row(trace, comp_res, js, 0.0, nan, nan, nan, t0)
                return SolveResult("linesearch_failure", x, trace, "linesearch", k, exc)
            comp_res.append(step.residual)
            js.append(-1 if step.linesearch is None else step.linesearch.j)
            n_solved += step.solved
            ls = step.linesearch
            if ls is not None and step.normal is not None:
                lhs = float(step.normal @ (z - ls.x_bar))
                d = z - step.J
                bound = ls.alpha * params.delta / params.beta_hi * float(d @ d)
                accept_m = max(accept_m, bound - lhs - ACCEPT_SLACK)
                _check(verify, bound - lhs - ACCEPT_SLACK, "accepted-step inequality", k, i)
                if xstar is not None:
                    c = float(step.normal @ (xstar - ls.x_bar)) - CONTAINMENT_SLACK
                    containment_m = max(containment_m, c)
                    _check(verify, c, "solution containment in halfspace", k, i)
            z_next = step.z_next
            if xstar is not None:
                c = dist(z_next) - dist(z) - FEJER_SLACK
                chain_m = max(chain_m, c)
                _check(verify, c, "intra-sweep Fejer chain", k, i)
            if verify:
                _check(True, float(X.distance(z_next)) - IN_X_SLACK, "iterate in X", k, i)
            z = z_next

        if n_solved == len(comps):
            _finish_row(trace, comp_res, js, 0.0, nan, nan, nan, t0)
            return SolveResult("solved", x, trace, "all_components_fixed", k)

        fejer_m = nan if xstar is None else dist(z) - dist(x) - FEJER_SLACK
        if xstar is not None:
            _check(verify, fejer_m, "Fejer monotonicity", k, None)
        _finish_row(trace, comp_res, js, float(np.linalg.norm(z - x)), fejer_m,
                    _nan_if_inf(chain_m), _nan_if_inf(containment_m), t0,
                    _nan_if_inf(accept_m))
        x = z

    raise AssertionError("unreachable")


def _nan_if_inf(v):
    return math.nan if v == -math.inf else v


def _finish_row(trace, comp_res, js, disp, fejer_m, chain_m, containment_m, t0, accept_m=math.nan):
    trace.component_residuals.append(np.asarray(comp_res, dtype=float))
    trace.linesearch_j.append(np.asarray(js, dtype=int))
    trace.linesearch_total.append(int(sum(j + 1 for j in js if j >= 0)))
    trace.displacement.append(disp)
    trace.fejer_margin.append(fejer_m)
    trace.chain_margin.append(chain_m)
    trace.containment_margin.append(containment_m)
    trace.accept_margin.append(accept_m)
    trace.time_ms.append(1e3 * (time.perf_counter() - t0))


def solve_baseline_fb(instance, step, max_iter=1000, tol=1e-6, x0=None):
    """Fixed-step forward-backward iteration ``x <- J(x)`` for a single inclusion.

    No linesearch and no safeguard: convergence needs ``step < 2/L`` for an
    ``L``-Lipschitz forward map. A run that overflows stops early with status
    ``"max_iterations"``.
    """
    if len(instance.components) != 1:
        raise ConfigurationError("the fixed-step baseline handles single-component instances only")
    if not step > 0:
        raise ConfigurationError("step must be positive")
    (A, B), = instance.components
    x = np.asarray(instance.default_start() if x0 is None else x0, dtype=float)
    xstar = getattr(instance, "known_solution", None)
    trace = SolveTrace()
    t0 = time.perf_counter()
    nan = math.nan
    for k in range(max_iter + 1):
        with np.errstate(over="ignore", invalid="ignore"):
            J = forward_backward_map(A, B, step, x)
            r = float(np.linalg.norm(x - J))
        trace.iterates.append(x.copy())
        trace.residuals.append(r)
        trace.dist_to_star.append(nan if xstar is None else float(np.linalg.norm(x - xstar)))
        trace.betas.append(float(step))
        _finish_row(trace, [r], [], float(np.linalg.norm(J - x)), nan, nan, nan, t0)
        if r <= tol:
            return SolveResult("solved", x, trace, "residual", k)
        if not np.isfinite(r) or k == max_iter:
            return SolveResult("max_iterations", x, trace, "max_iter", k)
        x = J
    raise AssertionError("unreachable")
