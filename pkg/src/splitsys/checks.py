"""Sampled checks of operator and projection identities.

Each check returns a :class:`CheckResult`; ``worst`` is the largest observed
violation (positive means the inequality failed beyond its tolerance) and
``witness`` holds the offending sample when there is one.
"""

from dataclasses import dataclass, field

import numpy as np

from .geometry import Ball, Box, Halfspace, Hyperplane, WholeSpace
from .operators import AffineOperator, NormalCone, forward_backward_map

__all__ = [
    "CheckResult", "check_projection_nonexpansive", "check_obtuse_angle",
    "check_idempotent", "check_resolvent_is_projection", "check_firm_nonexpansive",
    "check_monotone", "check_selection", "check_graph_consistency",
    "check_fixed_point", "working_box", "property_suite", "catalog_sets",
]


@dataclass
class CheckResult:
    name: str
    passed: bool
    count: int
    worst: float
    witness: dict = field(default_factory=dict)

    def line(self):
        tag = "PASS" if self.passed else "FAIL"
        return f"[{tag}] {self.name}: {self.count} samples, worst margin {self.worst:.3e}"


def _result(name, margins, tol, witness_of):
    margins = np.asarray(margins, dtype=float)
    k = int(np.argmax(margins))
    worst = float(margins[k])
    passed = worst <= tol
    return CheckResult(name, passed, margins.size, worst, {} if passed else witness_of(k))


def working_box(X, scale=2.0):
    """Box around ``X`` (its bounding box, widened by ``scale``) used for sampling."""
    if isinstance(X, Box):
        c, h = 0.5 * (X.lo + X.hi), 0.5 * (X.hi - X.lo)
    elif isinstance(X, Ball):
        c, h = X.center, X.radius * np.ones(X.n)
    else:
        c, h = np.zeros(X.n), np.ones(X.n)
    h = np.maximum(h, 1e-3)
    return Box(c - scale * h, c + scale * h)


def check_projection_nonexpansive(C, rng, pairs=1000, spread=3.0, tol=1e-9):
    """``||P x - P y||^2 <= ||x - y||^2 - ||(P x - x) - (P y - y)||^2``."""
    x = _around(C, rng, pairs, spread)
    y = _around(C, rng, pairs, spread)
    px, py = C.project(x), C.project(y)
    lhs = np.sum((px - py) ** 2, axis=1)
    rhs = np.sum((x - y) ** 2, axis=1) - np.sum(((px - x) - (py - y)) ** 2, axis=1)
    return _result(f"{C.kind}: projection nonexpansive with displacement", lhs - rhs, tol,
                   lambda k: {"x": x[k].tolist(), "y": y[k].tolist()})


def check_obtuse_angle(C, rng, pairs=1000, spread=3.0, tol=1e-10):
    """``<x - P x, z - P x> <= 0`` for members ``z``."""
    x = _around(C, rng, pairs, spread)
    z = C.sample(rng, pairs, spread)
    px = C.project(x)
    m = np.sum((x - px) * (z - px), axis=1)
    return _result(f"{C.kind}: obtuse angle", m, tol,
                   lambda k: {"x": x[k].tolist(), "z": z[k].tolist()})


def check_idempotent(C, rng, pairs=1000, spread=3.0, tol=1e-12):
    x = _around(C, rng, pairs, spread)
    px = C.project(x)
    m = np.linalg.norm(C.project(px) - px, axis=1) - tol * (1 + np.linalg.norm(px, axis=1))
    return _result(f"{C.kind}: projection idempotent", m, 0.0, lambda k: {"x": x[k].tolist()})


def check_resolvent_is_projection(C, rng, betas=100, points=20, spread=3.0, tol=1e-12):
    """The normal-cone resolvent equals the projection for every step size."""
    B = NormalCone(C)
    x = _around(C, rng, points, spread)
    p = C.project(x)
    bs = np.exp(rng.uniform(np.log(1e-3), np.log(1e3), betas))
    m = [float(np.max(np.linalg.norm(B.resolvent(b, x) - p, axis=1))) for b in bs]
    return _result(f"{C.kind}: resolvent of normal cone is the projection", m, tol,
                   lambda k: {"beta": float(bs[k])})


def check_firm_nonexpansive(B, region, rng, pairs=1000, betas=(0.1, 0.55, 1.0), tol=1e-9):
    """``||R x - R y||^2 <= <R x - R y, x - y>`` for the resolvent ``R``."""
    margins, wit = [], []
    for b in betas:
        x = region.sample(rng, pairs)
        y = region.sample(rng, pairs)
        d = B.resolvent(b, x) - B.resolvent(b, y)
        margins.append(np.sum(d * d, axis=1) - np.sum(d * (x - y), axis=1))
        wit += [(b, xi, yi) for xi, yi in zip(x, y)]
    return _result(f"{B.kind}: resolvent firmly nonexpansive", np.concatenate(margins), tol,
                   lambda k: {"beta": wit[k][0], "x": wit[k][1].tolist(), "y": wit[k][2].tolist()})


def check_monotone(A, region, rng, pairs=1000, tol=1e-10):
    """``<A x - A y, x - y> >= -tol``; for affine maps also tries the most
    negative eigenvector of the symmetric part, which is the natural witness."""
    x = region.sample(rng, pairs)
    y = region.sample(rng, pairs)
    if isinstance(A, AffineOperator):
        w, V = np.linalg.eigh(0.5 * (A.M + A.M.T))
        c = 0.5 * (region.lo + region.hi)
        h = 0.25 * float(np.min(region.hi - region.lo))
        x = np.vstack([x, c + h * V[:, 0]])
        y = np.vstack([y, c - h * V[:, 0]])
    m = -np.sum((A(x) - A(y)) * (x - y), axis=1)
    return _result(f"{A.kind}: forward map monotone", m, tol,
                   lambda k: {"x": x[k].tolist(), "y": y[k].tolist()})


def check_selection(B, region, rng, R, points=200, tol=1e-12):
    """Selections are bounded by ``R`` and lie in the graph of ``B``."""
    if isinstance(B, NormalCone):
        x = B.set.project(region.sample(rng, points))
    else:
        x = region.sample(rng, points)
        x[:, : max(1, B.n // 3)] = 0.0  # exercise the kink
    margins = []
    for xi in x:
        u = B.selection(xi, R)
        m = float(np.linalg.norm(u)) - R
        if not B.in_graph(xi, u):
            m = max(m, 1.0)
        margins.append(m)
    return _result(f"{B.kind}: selection bounded and in graph", margins, tol,
                   lambda k: {"x": x[k].tolist()})


def check_graph_consistency(B, region, rng, points=300, beta=0.55, tol=1e-9):
    """``v = (x - R x)/beta`` lies in ``B(R x)``, and the pairs ``(R x, v)`` are monotone."""
    x = region.sample(rng, points)
    p = B.resolvent(beta, x)
    v = (x - p) / beta
    bad = np.array([0.0 if B.in_graph(pi, vi) else 1.0 for pi, vi in zip(p, v)])
    i, j = rng.integers(points, size=(2, points))
    mono = -np.sum((p[i] - p[j]) * (v[i] - v[j]), axis=1)
    return _result(f"{B.kind}: resolvent graph consistency", np.concatenate([np.where(bad > 0, 1.0, -1.0), mono]), tol,
                   lambda k: {"x": x[k % points].tolist()})


def check_fixed_point(instance, betas, tol=1e-9):
    """A known solution is a fixed point of every component's forward-backward map."""
    xs = instance.known_solution
    m = [max(float(np.linalg.norm(forward_backward_map(A, B, b, xs) - xs)) for A, B in instance.components)
         for b in betas]
    return _result("known solution is a forward-backward fixed point", m, tol,
                   lambda k: {"beta": float(betas[k])})


def _around(C, rng, size, spread):
    if isinstance(C, Box):
        c, h = 0.5 * (C.lo + C.hi), 0.5 * (C.hi - C.lo) + 1.0
        return c + spread * h * rng.uniform(-1, 1, (size, C.n))
    if isinstance(C, Ball):
        return C.center + spread * (C.radius + 1.0) * rng.standard_normal((size, C.n))
    if isinstance(C, Halfspace):
        return C.anchor + spread * rng.standard_normal((size, C.n))
    return spread * rng.standard_normal((size, C.n))


def catalog_sets(n, rng):
    """One set of every kind in dimension ``n``."""
    w = rng.standard_normal(n)
    return [
        WholeSpace(n),
        Box(-rng.uniform(0.5, 2, n), rng.uniform(0.5, 2, n)),
        Ball(rng.standard_normal(n), rng.uniform(0.5, 2)),
        Halfspace(w, rng.standard_normal(n)),
        Hyperplane(w, float(rng.standard_normal())),
    ]


def property_suite(instance, rng, pairs=1000, params=None):
    """All sampled checks for the operators and sets of ``instance``."""
    from .solver import AlgoParams
    params = params or AlgoParams()
    region = working_box(instance.X)
    out = []
    sets = [instance.X] + [B.set for _, B in instance.components if isinstance(B, NormalCone)]
    for C in sets:
        out += [check_projection_nonexpansive(C, rng, pairs), check_obtuse_angle(C, rng, pairs),
                check_idempotent(C, rng, pairs), check_resolvent_is_projection(C, rng)]
    for A, B in instance.components:
        out += [check_monotone(A, region, rng, pairs),
                check_firm_nonexpansive(B, region, rng, pairs),
                check_selection(B, region, rng, instance.radius),
                check_graph_consistency(B, region, rng)]
    if instance.known_solution is not None:
        out.append(check_fixed_point(instance, np.linspace(params.beta_lo, params.beta_hi, 11)))
    return out
