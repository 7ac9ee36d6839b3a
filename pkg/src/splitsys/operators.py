"""Monotone operators: single-valued forward maps and set-valued operators.

Forward operators implement ``__call__(x)``. Set-valued operators implement
``resolvent(beta, x)`` computing ``(I + beta*B)^{-1}(x)`` and
``selection(x, R)`` returning some ``u`` in ``B(x)`` with ``||u|| <= R``.
All oracles accept a single vector or a batch with the vector on the last axis,
except ``selection`` which is called on single points.
"""

import numpy as np

from .errors import ConfigurationError, DomainError
from .geometry import Ball, Box, ConvexSet, Halfspace, Hyperplane, WholeSpace, set_from_dict

__all__ = [
    "ForwardOperator", "AffineOperator", "CallableOperator",
    "SetValuedOperator", "NormalCone", "L1Subdifferential", "ZeroOperator",
    "affine_eval", "resolvent_normal_cone", "soft_threshold",
    "selection_normal_cone", "selection_l1", "forward_backward_map", "forward_backward_point",
    "forward_from_dict", "setvalued_from_dict",
]

# slack for membership of a selection point in a normal cone's set
MEMBERSHIP_TOL = 1e-9
MONOTONE_TOL = 1e-10
# relative distance at which a point counts as lying on a set's boundary
BOUNDARY_TOL = 1e-12


def affine_eval(M, q, x):
    """Return ``M x + q`` (``x`` may be batched)."""
    M = np.asarray(M, dtype=float)
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != M.shape[1] or np.shape(q)[-1] != M.shape[0]:
        raise ValueError(f"dimension mismatch: M is {M.shape}, q has {np.shape(q)}, x has {x.shape}")
    return x @ M.T + q


def resolvent_normal_cone(C, beta, x):
    """Resolvent of the normal cone of ``C``; the projection onto ``C`` for any beta > 0."""
    if not beta > 0:
        raise ValueError("beta must be positive")
    return C.project(x)


def soft_threshold(lam, beta, x):
    """Resolvent of ``lam * d||.||_1`` with step ``beta``: shrink each entry by ``beta*lam``."""
    x = np.asarray(x, dtype=float)
    return np.sign(x) * np.maximum(np.abs(x) - beta * lam, 0.0)


def selection_normal_cone(C, x, R, hint=None):
    """Element of ``N_C(x)`` with norm at most ``R`` nearest to ``hint``.

    Without a hint this is zero, the minimal-norm element. Raises DomainError
    when ``x`` is not in ``C`` (the normal cone is empty there).
    """
    x = np.asarray(x, dtype=float)
    dist = float(np.linalg.norm(x - C.project(x)))
    if dist > MEMBERSHIP_TOL:
        raise DomainError(f"point lies outside the set (distance {dist:.3e}); normal cone is empty")
    if hint is None:
        return np.zeros_like(x)
    u = _project_normal_cone(C, x, np.asarray(hint, dtype=float))
    nu = float(np.linalg.norm(u))
    # scaling keeps u in the cone and gives the nearest point of cone and ball
    return u * (R / nu) if nu > R else u


def _on_boundary(gap, scale):
    return abs(gap) <= BOUNDARY_TOL * (1.0 + scale)


def _project_normal_cone(C, x, h):
    if isinstance(C, Box):
        at_hi = np.abs(x - C.hi) <= BOUNDARY_TOL * (1.0 + np.abs(C.hi))
        at_lo = np.abs(x - C.lo) <= BOUNDARY_TOL * (1.0 + np.abs(C.lo))
        u = np.zeros_like(x)
        u = np.where(at_hi, np.maximum(h, 0.0), u)
        u = np.where(at_lo, np.minimum(h, 0.0), u)
        return np.where(at_hi & at_lo, h, u)
    if isinstance(C, Ball):
        d = x - C.center
        r = float(np.linalg.norm(d))
        if C.radius == 0.0:
            return h.copy()
        if not _on_boundary(r - C.radius, C.radius):
            return np.zeros_like(x)
        e = d / r
        return max(float(h @ e), 0.0) * e
    if isinstance(C, Halfspace):
        if C.degenerate or not _on_boundary(float(C.violation(x)), float(np.linalg.norm(C.normal))):
            return np.zeros_like(x)
        return max(float(h @ C.normal), 0.0) / C._nn * C.normal
    if isinstance(C, Hyperplane):
        return float(h @ C.normal) / C._nn * C.normal
    return np.zeros_like(x)


def selection_l1(lam, x, R, hint=None):
    """Subgradient of ``lam*||x||_1`` with norm at most ``R``.

    Without a hint this is the minimal-norm one, ``lam * sign(x)`` (zero at
    zero entries). With a hint, zero entries take ``hint`` clipped to
    ``[-lam, lam]``, unless that would break the radius bound.
    Raises ConfigurationError when ``R < lam*sqrt(n)``.
    """
    x = np.asarray(x, dtype=float)
    if R < lam * np.sqrt(x.shape[-1]):
        raise ConfigurationError(f"radius R={R} is below lam*sqrt(n)={lam * np.sqrt(x.shape[-1]):.6g}")
    u = lam * np.sign(x)
    if hint is not None:
        free = x == 0
        v = np.where(free, np.clip(hint, -lam, lam), u)
        if float(np.linalg.norm(v)) <= R:
            u = v
    return u


class ForwardOperator:
    """Single-valued monotone map ``A``."""

    kind = None
    n = None

    def __call__(self, x):
        raise NotImplementedError

    def to_dict(self):
        raise TypeError(f"{type(self).__name__} is not serializable")


class AffineOperator(ForwardOperator):
    """``A(x) = M x + q``.

    Monotone iff the symmetric part of ``M`` is positive semidefinite, which is
    checked here unless ``check=False``.
    """

    kind = "affine"

    def __init__(self, M, q=None, check=True):
        M = np.atleast_2d(np.asarray(M, dtype=float))
        if M.ndim != 2 or M.shape[0] != M.shape[1]:
            raise ValueError(f"M must be square, got shape {M.shape}")
        n = M.shape[0]
        q = np.zeros(n) if q is None else np.asarray(q, dtype=float)
        if q.shape != (n,):
            raise ValueError(f"q must have length {n}, got shape {q.shape}")
        if not (np.all(np.isfinite(M)) and np.all(np.isfinite(q))):
            raise ValueError("M and q must be finite")
        self.M, self.q, self.n = M, q, n
        self.min_sym_eig = float(np.linalg.eigvalsh(0.5 * (M + M.T))[0])
        if check and self.min_sym_eig < -MONOTONE_TOL:
            raise ConfigurationError(
                f"affine map is not monotone: symmetric part has eigenvalue {self.min_sym_eig:.3e}")

    def __call__(self, x):
        return affine_eval(self.M, self.q, x)

    @property
    def lipschitz(self):
        return float(np.linalg.norm(self.M, 2))

    def to_dict(self):
        return {"kind": self.kind, "M": self.M.tolist(), "q": self.q.tolist()}


class CallableOperator(ForwardOperator):
    """Wraps a black-box callable. Monotonicity is the caller's obligation."""

    kind = "callable"

    def __init__(self, func, n):
        self.func, self.n = func, int(n)

    def __call__(self, x):
        return np.asarray(self.func(x), dtype=float)


class SetValuedOperator:
    """Maximal monotone ``B`` given through its resolvent and a bounded selection."""

    kind = None
    n = None

    def resolvent(self, beta, x):
        raise NotImplementedError

    def selection(self, x, R, hint=None):
        """Some ``u`` in ``B(x)`` with ``||u|| <= R``: the one nearest ``hint``,
        or the minimal-norm one when no hint is given."""
        raise NotImplementedError

    def in_graph(self, x, u, tol=1e-9):
        """Structural check that ``u`` belongs to ``B(x)``."""
        raise NotImplementedError

    def in_domain(self, x, tol=MEMBERSHIP_TOL):
        return True

    def to_dict(self):
        raise NotImplementedError


class NormalCone(SetValuedOperator):
    kind = "normal_cone"

    def __init__(self, convex_set):
        if not isinstance(convex_set, ConvexSet):
            raise TypeError("NormalCone needs a ConvexSet")
        self.set = convex_set
        self.n = convex_set.n

    def resolvent(self, beta, x):
        return resolvent_normal_cone(self.set, beta, x)

    def selection(self, x, R, hint=None):
        return selection_normal_cone(self.set, x, R, hint)

    def in_domain(self, x, tol=MEMBERSHIP_TOL):
        return self.set.contains(x, tol)

    def in_graph(self, x, u, tol=1e-9):
        # u is normal at x iff projecting x + u lands back on x
        x, u = np.asarray(x, float), np.asarray(u, float)
        if not self.set.contains(x, tol):
            return False
        return float(np.linalg.norm(self.set.project(x + u) - x)) <= tol * (1 + np.linalg.norm(u))

    def to_dict(self):
        return {"kind": self.kind, "set": self.set.to_dict()}


class ZeroOperator(NormalCone):
    """``B = 0``, i.e. the normal cone of the whole space."""

    kind = "zero"

    def __init__(self, n):
        super().__init__(WholeSpace(n))

    def resolvent(self, beta, x):
        return np.array(x, dtype=float)

    def to_dict(self):
        return {"kind": self.kind, "n": self.n}


class L1Subdifferential(SetValuedOperator):
    """``B = lam * d||.||_1`` on R^n."""

    kind = "l1"

    def __init__(self, lam, n):
        self.lam = float(lam)
        if not self.lam > 0:
            raise ValueError("lambda must be positive")
        self.n = int(n)

    def resolvent(self, beta, x):
        return soft_threshold(self.lam, beta, x)

    def selection(self, x, R, hint=None):
        return selection_l1(self.lam, x, R, hint)

    def in_graph(self, x, u, tol=1e-9):
        x, u = np.asarray(x, float), np.asarray(u, float)
        nz = x != 0
        on_support = np.abs(u[nz] - self.lam * np.sign(x[nz])) <= tol
        off_support = np.abs(u[~nz]) <= self.lam + tol
        return bool(np.all(on_support) and np.all(off_support))

    def to_dict(self):
        return {"kind": self.kind, "lambda": self.lam, "n": self.n}


def forward_backward_map(A, B, beta, z):
    """``(I + beta B)^{-1}(z - beta A(z))``."""
    z = np.asarray(z, dtype=float)
    return B.resolvent(beta, z - beta * A(z))


def forward_backward_point(A, B, beta, z):
    """``J = forward_backward_map(A, B, beta, z)`` together with
    ``v = (z - beta A(z) - J) / beta``, the element of ``B(J)`` the resolvent
    implicitly picked."""
    z = np.asarray(z, dtype=float)
    w = z - beta * A(z)
    J = B.resolvent(beta, w)
    return J, (w - J) / beta


def forward_from_dict(d, check=True):
    if d.get("kind") != "affine":
        raise ValueError(f"unknown forward operator kind {d.get('kind')!r}")
    return AffineOperator(d["M"], d["q"], check=check)


def setvalued_from_dict(d, n=None):
    kind = d.get("kind")
    if kind == "normal_cone":
        return NormalCone(set_from_dict(d["set"]))
    if kind == "zero":
        return ZeroOperator(d.get("n", n))
    if kind == "l1":
        return L1Subdifferential(d["lambda"], d.get("n", n))
    raise ValueError(f"unknown set-valued operator kind {kind!r}")
