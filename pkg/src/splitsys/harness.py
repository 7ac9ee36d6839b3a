"""Problem instances with planted solutions, an independent reference solver,
run metrics, and JSON/CSV persistence."""

import json
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import ConfigurationError, OracleFailure
from .geometry import Ball, Box, ConvexSet, WholeSpace, set_from_dict
from .operators import (AffineOperator, L1Subdifferential, NormalCone, ZeroOperator,
                        forward_from_dict, setvalued_from_dict)
from .solver import AlgoParams

__all__ = [
    "ProblemInstance", "Metrics", "generate_planted_system", "generate_ill_conditioned",
    "oracle_solve", "evaluate_run", "acceptance_suite", "suite_cell",
    "save_instance", "load_instance", "save_metrics", "read_trace_csv",
]

PLANT_TOL = 1e-8
STRUCTURES = ("affine_vi", "mixed_l1")
# ||W^T W|| of the least-squares term; keeps beta*L below 1 - delta at default
# settings so the unit step is accepted near the solution
L1_GRAM_NORM = 0.8


@dataclass
class ProblemInstance:
    """A system ``0 in A_i(x) + B_i(x)``, ``i = 1..m``, restricted to ``X``."""

    components: list
    X: ConvexSet
    radius: float = 1.0
    known_solution: Optional[np.ndarray] = None
    name: str = "instance"
    seed: Optional[int] = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if len(self.components) < 1:
            raise ConfigurationError("an instance needs at least one component")
        self.components = [tuple(c) for c in self.components]
        for i, (A, B) in enumerate(self.components):
            if A.n != self.X.n or B.n != self.X.n:
                raise ConfigurationError(
                    f"component {i} has dimensions ({A.n}, {B.n}), X has {self.X.n}")
        if not self.radius > 0:
            raise ConfigurationError("radius must be positive")
        if self.known_solution is not None:
            self.known_solution = np.asarray(self.known_solution, dtype=float)

    @property
    def n(self):
        return self.X.n

    @property
    def m(self):
        return len(self.components)

    def default_start(self):
        """Deterministic starting point in ``X`` derived from the seed."""
        rng = np.random.default_rng([0 if self.seed is None else self.seed, 1])
        if isinstance(self.X, Box):
            return rng.uniform(self.X.lo, self.X.hi)
        return self.X.project(rng.standard_normal(self.n))

    def validate(self, beta=None):
        """Check assumptions that are checkable for catalog operators.

        Returns a list of warnings; raises ConfigurationError on a hard
        violation (bad radius for an l1 term, planted point not a solution).
        """
        beta = AlgoParams().beta_mid if beta is None else beta
        notes = []
        for i, (A, B) in enumerate(self.components):
            if isinstance(B, L1Subdifferential) and self.radius < B.lam * math.sqrt(self.n):
                raise ConfigurationError(
                    f"component {i}: radius {self.radius} < lambda*sqrt(n) = {B.lam * math.sqrt(self.n):.6g}")
            if isinstance(B, NormalCone) and not isinstance(B, ZeroOperator):
                if not _set_inside(self.X, B.set):
                    notes.append(f"component {i}: X is not contained in the normal cone's set")
        if self.known_solution is not None:
            xs = self.known_solution
            if not self.X.contains(xs, 1e-9):
                raise ConfigurationError("known solution lies outside X")
            r = plant_residual(self, beta)
            if r > PLANT_TOL:
                raise ConfigurationError(f"known solution has residual {r:.3e} > {PLANT_TOL}")
        return notes

    def to_dict(self):
        d = {
            "name": self.name,
            "n": self.n,
            "m": self.m,
            "seed": self.seed,
            "X": self.X.to_dict(),
            "components": [{"A": A.to_dict(), "B": B.to_dict()} for A, B in self.components],
            "R": self.radius,
        }
        if self.known_solution is not None:
            d["known_solution"] = self.known_solution.tolist()
        if self.meta:
            d["meta"] = self.meta
        return d

    @classmethod
    def from_dict(cls, d, check=True):
        n = d["n"]
        comps = [(forward_from_dict(c["A"], check=check), setvalued_from_dict(c["B"], n))
                 for c in d["components"]]
        if "m" in d and d["m"] != len(comps):
            raise ConfigurationError(f"m={d['m']} but {len(comps)} components listed")
        return cls(comps, set_from_dict(d["X"]), d["R"], d.get("known_solution"),
                   d.get("name", "instance"), d.get("seed"), d.get("meta", {}))


def _set_inside(inner, outer, tol=1e-9):
    if isinstance(outer, WholeSpace):
        return True
    if isinstance(inner, Box):
        return bool(np.all(outer.distance(inner.vertices()) <= tol))
    if isinstance(inner, Ball) and isinstance(outer, Ball):
        return float(np.linalg.norm(inner.center - outer.center)) + inner.radius <= outer.radius + tol
    return True  # not detectable


def plant_residual(instance, beta):
    from .solver import residual
    return residual(instance, beta, instance.known_solution)


def _random_monotone(rng, n, spread=0.5, skew=0.3):
    G = np.eye(n) + spread * rng.standard_normal((n, n)) / math.sqrt(n)
    S = skew * rng.standard_normal((n, n)) / math.sqrt(n)
    return G.T @ G + (S - S.T)


def _vi_component(rng, xstar, half_width, kind):
    n = xstar.size
    M = _random_monotone(rng, n)
    A = AffineOperator(M, -M @ xstar)
    if kind == "box":
        C = Box(xstar - half_width - rng.uniform(0.1, 1.0, n),
                xstar + half_width + rng.uniform(0.1, 1.0, n))
    else:
        off = rng.standard_normal(n)
        off *= rng.uniform(0, 0.5) / np.linalg.norm(off)
        C = Ball(xstar + off, np.linalg.norm(off) + half_width * math.sqrt(n) + rng.uniform(0.1, 1.0))
    return A, NormalCone(C)


def _l1_component(rng, xstar, zero_mask, gram_norm=L1_GRAM_NORM):
    n = xstar.size
    lam = float(rng.uniform(0.2, 1.0))
    W = np.eye(n) + 0.5 * rng.standard_normal((n, n)) / math.sqrt(n)
    W *= math.sqrt(gram_norm) / np.linalg.norm(W, 2)
    s = np.where(zero_mask, rng.uniform(-0.9, 0.9, n), np.sign(xstar))
    # W^T (W x* - b) = -lam s makes x* a zero of A + lam d||.||_1
    b = W @ xstar + lam * np.linalg.solve(W.T, s)
    A = AffineOperator(W.T @ W, -W.T @ b)
    return A, L1Subdifferential(lam, n), lam


def generate_planted_system(n, m, seed, structure="affine_vi", half_width=1.0):
    """Random system with a common solution ``x*`` built in.

    ``affine_vi``: every component is ``A_i(x) = M_i (x - x*)`` with a
    monotone ``M_i`` (PSD symmetric part plus a skew part) and ``B_i`` the
    normal cone of a box or ball that holds ``x*`` in its interior.
    ``mixed_l1``: component 0 is instead ``A(x) = W^T(W x - b)`` with
    ``B = lam d||.||_1``; ``b`` is solved for so that ``x*`` (which has some
    zero entries) is a zero of ``A + B``. ``W`` is scaled to
    ``||W^T W|| = 0.8``.

    ``X`` is the box ``x* +- half_width``, inside every ``C_i``.
    """
    if int(n) < 1 or int(m) < 1:
        raise ConfigurationError(f"need n >= 1 and m >= 1, got n={n}, m={m}")
    if structure not in STRUCTURES:
        raise ConfigurationError(f"unknown structure {structure!r}; choose from {STRUCTURES}")
    if not half_width > 0:
        raise ConfigurationError("half_width must be positive")
    n, m = int(n), int(m)
    rng = np.random.default_rng(seed)
    xstar = rng.uniform(-1.0, 1.0, n)
    components = []
    radius = 1.0
    zero_mask = np.zeros(n, dtype=bool)
    if structure == "mixed_l1":
        zero_mask = rng.uniform(size=n) < 0.3
        if n > 1 and not zero_mask.any():
            zero_mask[rng.integers(n)] = True
        xstar[zero_mask] = 0.0
        A, B, lam = _l1_component(rng, xstar, zero_mask)
        components.append((A, B))
        radius = lam * math.sqrt(n) + 1.0
    while len(components) < m:
        kind = "box" if len(components) % 2 == 0 else "ball"
        components.append(_vi_component(rng, xstar, half_width, kind))
    X = Box(xstar - half_width, xstar + half_width)
    inst = ProblemInstance(components, X, radius, xstar,
                           name=f"{structure}-n{n}-m{m}-s{seed}", seed=seed,
                           meta={"structure": structure})
    for note in inst.validate():
        raise ConfigurationError(f"generated instance failed validation: {note}")
    return inst


def generate_ill_conditioned(n=2, L=100.0, mu=1.0, seed=0, half_width=1.0):
    """Single unconstrained affine inclusion ``M (x - x*) = 0`` whose
    symmetric part has eigenvalues spread over ``[mu, L]``."""
    rng = np.random.default_rng(seed)
    Q, _ = np.linalg.qr(rng.standard_normal((n, n)))
    M = Q @ np.diag(np.linspace(L, mu, n)) @ Q.T
    M = 0.5 * (M + M.T)
    xstar = rng.uniform(-1.0, 1.0, n)
    A = AffineOperator(M, -M @ xstar)
    X = Box(xstar - half_width, xstar + half_width)
    return ProblemInstance([(A, ZeroOperator(n))], X, 1.0, xstar,
                           name=f"ill-n{n}-L{L:g}-s{seed}", seed=seed, meta={"structure": "ill_conditioned"})


def suite_cell(seed):
    """``(n, m, structure)`` for acceptance-suite seed ``seed``; seeds 1..9 cover every (n, m) pair."""
    s = int(seed) - 1
    return (2, 10, 50)[s % 3], (1, 2, 5)[(s // 3) % 3], ("affine_vi", "mixed_l1")[s % 2]


def acceptance_suite(seeds=range(1, 21)):
    return [generate_planted_system(*suite_cell(s)[:2], seed=s, structure=suite_cell(s)[2])
            for s in seeds]


def _fb_residual(components, beta, x):
    """Max over components of ``||x - J_i(x)||`` for ``x`` of shape ``(..., n)``."""
    out = None
    for A, B in components:
        r = np.linalg.norm(x - B.resolvent(beta, x - beta * A(x)), axis=-1)
        out = r if out is None else np.maximum(out, r)
    return out


def oracle_solve(instance, iters=20000, step0=None, tol=1e-12, check_every=100,
                 grid=True, grid_resolution=1e-3, failure_tol=1e-4):
    """Reference solution computed without linesearch or halfspace steps.

    Runs round-robin forward-backward passes ``x <- J_{i,b}(x)`` over the
    components and then the projection onto ``X``, with diminishing steps
    ``b_t = step0 / sqrt(t)``. ``step0`` defaults to ``1/L`` for the largest
    operator norm among affine forward maps. For ``n <= 2`` the answer is
    cross-checked against a refining grid search of the residual over ``X``'s
    bounding box.

    Raises OracleFailure if the final residual exceeds ``failure_tol``.
    """
    comps = instance.components
    beta_ref = AlgoParams().beta_mid
    if step0 is None:
        L = max((A.lipschitz for A, _ in comps if hasattr(A, "lipschitz")), default=1.0)
        step0 = 1.0 / max(L, 1.0)
    X = instance.X
    x = X.project(np.zeros(instance.n))
    for t in range(1, iters + 1):
        b = step0 / math.sqrt(t)
        for A, B in comps:
            x = B.resolvent(b, x - b * A(x))
        x = X.project(x)
        if t % check_every == 0 and _fb_residual(comps, beta_ref, x) <= tol:
            break
    r = float(_fb_residual(comps, beta_ref, x))
    if not r <= failure_tol:
        raise OracleFailure(f"oracle did not converge: residual {r:.3e} after {t} rounds")
    if grid and instance.n <= 2:
        g = grid_search(instance, beta_ref, grid_resolution)
        if np.linalg.norm(g - x) > 4 * grid_resolution:
            raise OracleFailure(f"grid search disagrees with the iteration: {g} vs {x}")
    return x


def grid_search(instance, beta, resolution=1e-3, points=201):
    """Minimize the max-component residual over a refining grid (n <= 2)."""
    n = instance.n
    if n > 2:
        raise ValueError("grid search is only for n <= 2")
    X = instance.X
    if isinstance(X, Box):
        lo, hi = X.lo.copy(), X.hi.copy()
    elif isinstance(X, Ball):
        lo, hi = X.center - X.radius, X.center + X.radius
    else:
        lo, hi = -10.0 * np.ones(n), 10.0 * np.ones(n)
    best = None
    while True:
        axes = [np.linspace(lo[d], hi[d], points) for d in range(n)]
        P = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, n)
        P = P[X.distance(P) <= 1e-12] if not isinstance(X, Box) else P
        best = P[np.argmin(_fb_residual(instance.components, beta, P))]
        cell = (hi - lo) / (points - 1)
        if np.all(cell <= resolution):
            return best
        lo = np.maximum(best - 3 * cell, lo)
        hi = np.minimum(best + 3 * cell, hi)


@dataclass
class Metrics:
    status: str
    reason: str
    final_residual: float
    iterations: int
    total_linesearch: int
    max_linesearch_j: int
    fejer_violations: int
    chain_violations: int
    containment_violations: int
    accept_violations: int
    max_tail_displacement: float
    distances: list
    wall_time_ms: float

    VOLATILE = ("wall_time_ms",)

    def to_dict(self):
        d = dict(self.__dict__)
        d["volatile"] = list(self.VOLATILE)
        return d


def _count_positive(values):
    return int(sum(1 for v in values if v is not None and not math.isnan(v) and v > 0))


def evaluate_run(trace, instance, status="", reason="", slack=1e-10, tail=10):
    """Summarize a trace. Fejer violations are counted against the instance's
    known solution: iterations where the distance grew by more than ``slack``."""
    if len(trace) == 0:
        raise ValueError("empty trace")
    xs = instance.known_solution
    dist = list(trace.dist_to_star)
    if xs is not None and any(math.isnan(d) for d in dist) and all(it is not None for it in trace.iterates):
        dist = [float(np.linalg.norm(x - xs)) for x in trace.iterates]
    if xs is None:
        fejer = 0
        dist = []
    else:
        fejer = sum(1 for a, b in zip(dist, dist[1:]) if b > a + slack)
    disp = [d for d in trace.displacement[:-1]]
    return Metrics(
        status=status,
        reason=reason,
        final_residual=float(trace.residuals[-1]),
        iterations=len(trace) - 1,
        total_linesearch=int(sum(trace.linesearch_total)),
        max_linesearch_j=trace.max_linesearch_j(),
        fejer_violations=int(fejer),
        chain_violations=_count_positive(trace.chain_margin),
        containment_violations=_count_positive(trace.containment_margin),
        accept_violations=_count_positive(trace.accept_margin),
        max_tail_displacement=float(max(disp[-tail:], default=0.0)),
        distances=dist,
        wall_time_ms=float(trace.time_ms[-1]),
    )


def save_instance(instance, path):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(instance.to_dict(), fh, indent=1)


def load_instance(path, check=True):
    with open(path, encoding="utf-8") as fh:
        return ProblemInstance.from_dict(json.load(fh), check=check)


def save_metrics(metrics, path):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(metrics.to_dict(), fh, indent=1)


def read_trace_csv(path):
    import csv
    with open(path, newline="", encoding="utf-8") as fh:
        return [dict(row) for row in csv.DictReader(fh)]
