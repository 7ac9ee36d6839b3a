"""Closed convex sets with exact projections.

Every set exposes ``project(x)`` (nearest point, batched over leading axes),
``contains(x, tol)`` and a JSON-ready ``to_dict()``.
"""

import numpy as np

__all__ = [
    "ConvexSet", "WholeSpace", "Box", "Ball", "Halfspace", "Hyperplane",
    "project", "project_halfspace", "set_from_dict",
]

# below this norm a halfspace normal is treated as zero
ZERO_NORMAL = 1e-14


def _vec(x, name="x"):
    x = np.asarray(x, dtype=float)
    if x.ndim != 1 or x.size == 0:
        raise ValueError(f"{name} must be a non-empty 1-d vector, got shape {x.shape}")
    if not np.all(np.isfinite(x)):
        raise ValueError(f"{name} has non-finite components")
    return x


class ConvexSet:
    """Base class. Subclasses set ``n`` and implement ``_project``."""

    kind = None
    n = None

    def project(self, x):
        x = np.asarray(x, dtype=float)
        if x.shape[-1] != self.n:
            raise ValueError(f"dimension mismatch: set has n={self.n}, point has {x.shape[-1]}")
        return self._project(x)

    def _project(self, x):
        raise NotImplementedError

    def distance(self, x):
        x = np.asarray(x, dtype=float)
        return np.linalg.norm(x - self.project(x), axis=-1)

    def contains(self, x, tol=1e-10):
        return bool(np.all(self.distance(x) <= tol))

    def sample(self, rng, size, spread=1.0):
        """Random points of the set (not uniform), for property sampling."""
        raise NotImplementedError

    def to_dict(self):
        raise NotImplementedError

    def __repr__(self):
        return f"{type(self).__name__}(n={self.n})"


class WholeSpace(ConvexSet):
    kind = "whole_space"

    def __init__(self, n):
        if int(n) < 1:
            raise ValueError("dimension must be >= 1")
        self.n = int(n)

    def _project(self, x):
        return x.copy()

    def sample(self, rng, size, spread=1.0):
        return spread * rng.standard_normal((size, self.n))

    def to_dict(self):
        return {"kind": self.kind, "n": self.n}


class Box(ConvexSet):
    kind = "box"

    def __init__(self, lo, hi):
        lo, hi = _vec(lo, "lo"), _vec(hi, "hi")
        if lo.shape != hi.shape:
            raise ValueError("lo and hi differ in dimension")
        if np.any(lo > hi):
            raise ValueError("empty box: lo > hi in some coordinate")
        self.lo, self.hi = lo, hi
        self.n = lo.size

    def _project(self, x):
        return np.clip(x, self.lo, self.hi)

    def sample(self, rng, size, spread=1.0):
        return rng.uniform(self.lo, self.hi, size=(size, self.n))

    def vertices(self, limit=1024):
        """Corner points; for large n a random subset of at most ``limit``."""
        if self.n <= 10:
            bits = (np.arange(2 ** self.n)[:, None] >> np.arange(self.n)) & 1
        else:
            rng = np.random.default_rng(self.n)
            bits = rng.integers(0, 2, size=(limit, self.n))
        return np.where(bits == 1, self.hi, self.lo)

    def to_dict(self):
        return {"kind": self.kind, "lo": self.lo.tolist(), "hi": self.hi.tolist()}


class Ball(ConvexSet):
    kind = "ball"

    def __init__(self, center, radius):
        self.center = _vec(center, "center")
        self.radius = float(radius)
        if not self.radius >= 0:
            raise ValueError("ball radius must be >= 0")
        self.n = self.center.size

    def _project(self, x):
        d = x - self.center
        r = np.linalg.norm(d, axis=-1, keepdims=True)
        with np.errstate(divide="ignore", invalid="ignore"):
            scale = np.where(r > self.radius, self.radius / r, 1.0)
        return self.center + scale * d

    def sample(self, rng, size, spread=1.0):
        d = rng.standard_normal((size, self.n))
        d /= np.linalg.norm(d, axis=1, keepdims=True)
        return self.center + self.radius * rng.uniform(0, 1, (size, 1)) ** (1 / self.n) * d

    def to_dict(self):
        return {"kind": self.kind, "center": self.center.tolist(), "radius": self.radius}


class Halfspace(ConvexSet):
    """The set ``{y : <normal, y - anchor> <= 0}``.

    A normal of (numerically) zero norm makes this the whole space.
    """

    kind = "halfspace"

    def __init__(self, normal, anchor):
        self.normal = np.asarray(normal, dtype=float)
        self.anchor = np.asarray(anchor, dtype=float)
        if self.normal.shape != self.anchor.shape or self.normal.ndim != 1:
            raise ValueError("normal and anchor must be vectors of equal length")
        self.n = self.normal.size
        self._nn = float(self.normal @ self.normal)

    @property
    def degenerate(self):
        return np.sqrt(self._nn) <= ZERO_NORMAL

    def violation(self, y):
        return (np.asarray(y) - self.anchor) @ self.normal

    def contains(self, x, tol=1e-12):
        if self.degenerate:
            return True
        return bool(np.all(self.violation(x) <= tol))

    def _project(self, x):
        if self.degenerate:
            return x.copy()
        v = np.maximum(self.violation(x), 0.0)
        return x - (v / self._nn)[..., None] * self.normal

    def sample(self, rng, size, spread=1.0):
        return self.project(self.anchor + spread * rng.standard_normal((size, self.n)))

    def to_dict(self):
        return {"kind": self.kind, "normal": self.normal.tolist(), "anchor": self.anchor.tolist()}


class Hyperplane(ConvexSet):
    """The affine set ``{y : <normal, y> = offset}``."""

    kind = "hyperplane"

    def __init__(self, normal, offset):
        self.normal = _vec(normal, "normal")
        self.offset = float(offset)
        self._nn = float(self.normal @ self.normal)
        if self._nn <= ZERO_NORMAL ** 2:
            raise ValueError("hyperplane normal must be nonzero")
        self.n = self.normal.size

    def _project(self, x):
        gap = x @ self.normal - self.offset
        return x - (gap / self._nn)[..., None] * self.normal

    def sample(self, rng, size, spread=1.0):
        return self.project(spread * rng.standard_normal((size, self.n)))

    def to_dict(self):
        return {"kind": self.kind, "normal": self.normal.tolist(), "offset": self.offset}


def project(convex_set, x):
    """Nearest point of ``convex_set`` to ``x``."""
    return convex_set.project(x)


def project_halfspace(normal, anchor, z):
    """Project ``z`` onto ``{y : <normal, y - anchor> <= 0}``.

    Points already inside are returned unchanged, as is every point when the
    normal is numerically zero.
    """
    z = np.asarray(z, dtype=float)
    w = np.asarray(normal, dtype=float)
    ww = float(w @ w)
    if np.sqrt(ww) <= ZERO_NORMAL:
        return z.copy()
    gap = float(w @ (z - anchor))
    if gap <= 0.0:
        return z.copy()
    return z - (gap / ww) * w


_KINDS = {
    "whole_space": lambda d: WholeSpace(d["n"]),
    "box": lambda d: Box(d["lo"], d["hi"]),
    "ball": lambda d: Ball(d["center"], d["radius"]),
    "halfspace": lambda d: Halfspace(d["normal"], d["anchor"]),
    "hyperplane": lambda d: Hyperplane(d["normal"], d["offset"]),
}


def set_from_dict(d):
    try:
        build = _KINDS[d["kind"]]
    except KeyError:
        raise ValueError(f"unknown set kind {d.get('kind')!r}") from None
    return build(d)
