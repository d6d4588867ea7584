"""Convex domains with exact Euclidean projection, plus a bisection-based
inexact projection onto the intersection of a domain with a ball.

All domain objects are immutable after construction and their operations are
pure functions, so they are safe to share across concurrent solver calls.
"""

import math
from dataclasses import dataclass

import numpy as np

from .validation import as_vector, check_positive

MEMBERSHIP_TOL = 1e-9


class ConvexDomain:
    """A compact convex set with exact projection and a diameter bound."""

    dim: int
    diameter_bound: float

    def project(self, y):
        raise NotImplementedError

    def project_inexact(self, y, xi):
        # Exact projection trivially satisfies any inexactness budget.
        return self.project(y)

    def contains(self, y, tol=MEMBERSHIP_TOL):
        raise NotImplementedError

    def anchor(self):
        """A feasible point, used as a default solver start."""
        raise NotImplementedError

    def bounding_box(self):
        """(lower, upper) arrays enclosing the domain."""
        raise NotImplementedError


class Ball(ConvexDomain):
    def __init__(self, center, radius):
        self.center = as_vector(center, name="center")
        self.radius = check_positive(radius, "radius")
        self.dim = self.center.shape[0]
        self.diameter_bound = 2.0 * self.radius

    def project(self, y):
        y = as_vector(y, dim=self.dim, name="y")
        delta = y - self.center
        norm = float(np.linalg.norm(delta))
        if norm <= self.radius:
            return y
        return self.center + delta * (self.radius / norm)

    def contains(self, y, tol=MEMBERSHIP_TOL):
        y = as_vector(y, dim=self.dim, name="y")
        return float(np.linalg.norm(y - self.center)) <= self.radius + tol

    def anchor(self):
        return self.center.copy()

    def bounding_box(self):
        return self.center - self.radius, self.center + self.radius

    def __repr__(self):
        return f"Ball(center={self.center!r}, radius={self.radius})"


class Box(ConvexDomain):
    def __init__(self, lower, upper):
        self.lower = as_vector(lower, name="lower")
        self.upper = as_vector(upper, dim=self.lower.shape[0], name="upper")
        if np.any(self.lower > self.upper):
            raise ValueError("box lower bound exceeds upper bound")
        self.dim = self.lower.shape[0]
        self.diameter_bound = float(np.linalg.norm(self.upper - self.lower))
        if self.diameter_bound == 0.0:
            raise ValueError("box is a single point; diameter must be positive")

    def project(self, y):
        y = as_vector(y, dim=self.dim, name="y")
        return np.clip(y, self.lower, self.upper)

    def contains(self, y, tol=MEMBERSHIP_TOL):
        y = as_vector(y, dim=self.dim, name="y")
        return bool(np.all(y >= self.lower - tol) and np.all(y <= self.upper + tol))

    def anchor(self):
        return 0.5 * (self.lower + self.upper)

    def bounding_box(self):
        return self.lower.copy(), self.upper.copy()

    def __repr__(self):
        return f"Box(lower={self.lower!r}, upper={self.upper!r})"


class Product(ConvexDomain):
    """Cartesian product of domains, projected blockwise.

    The diameter bound is the Euclidean combination sqrt(sum_i D_i^2), which
    is what joint domains such as W0 x W^m require.
    """

    def __init__(self, factors):
        factors = list(factors)
        if not factors:
            raise ValueError("product of zero domains")
        self.factors = factors
        dims = [f.dim for f in factors]
        self.dim = int(sum(dims))
        ends = np.cumsum(dims)
        self._slices = [slice(int(e - d), int(e)) for d, e in zip(dims, ends)]
        self.diameter_bound = math.sqrt(sum(f.diameter_bound ** 2 for f in factors))

    def split(self, y):
        y = as_vector(y, dim=self.dim, name="y")
        return [y[s] for s in self._slices]

    def project(self, y):
        blocks = self.split(y)
        return np.concatenate([f.project(b) for f, b in zip(self.factors, blocks)])

    def project_inexact(self, y, xi):
        # Inexactness is only consumed by factors lacking exact projection
        # (e.g. a localized block); exact factors ignore the budget.
        blocks = self.split(y)
        return np.concatenate(
            [f.project_inexact(b, xi) for f, b in zip(self.factors, blocks)]
        )

    def contains(self, y, tol=MEMBERSHIP_TOL):
        blocks = self.split(y)
        return all(f.contains(b, tol) for f, b in zip(self.factors, blocks))

    def anchor(self):
        return np.concatenate([f.anchor() for f in self.factors])

    def bounding_box(self):
        boxes = [f.bounding_box() for f in self.factors]
        return (
            np.concatenate([lo for lo, _ in boxes]),
            np.concatenate([hi for _, hi in boxes]),
        )

    def __repr__(self):
        return f"Product({self.factors!r})"


@dataclass(frozen=True)
class BisectionInfo:
    """Trace of one inexact projection call."""

    steps: int
    base_projections: int
    multiplier: float


class LocalizedDomain(ConvexDomain):
    """Intersection of a base domain with a Euclidean ball B(center, radius).

    Exact projection onto the intersection is not available in general; the
    domain instead offers a xi-inexact projection built from a bisection over
    the Lagrange multiplier of the ball constraint, using only exact base
    projections.
    """

    def __init__(self, base, center, radius):
        if not isinstance(base, ConvexDomain):
            raise TypeError("base must be a ConvexDomain")
        self.base = base
        self.center = as_vector(center, dim=base.dim, name="center")
        self.radius = check_positive(radius, "radius")
        if not base.contains(self.center):
            raise ValueError("localization center must lie in the base domain")
        self.dim = base.dim
        self.diameter_bound = min(base.diameter_bound, 2.0 * self.radius)

    def project(self, y):
        raise NotImplementedError(
            "exact projection onto a localized domain is unavailable; "
            "use project_inexact(y, xi)"
        )

    def contains(self, y, tol=MEMBERSHIP_TOL):
        y = as_vector(y, dim=self.dim, name="y")
        in_ball = float(np.linalg.norm(y - self.center)) <= self.radius + tol
        return in_ball and self.base.contains(y, tol)

    def anchor(self):
        return self.center.copy()

    def bounding_box(self):
        lo, hi = self.base.bounding_box()
        return (
            np.maximum(lo, self.center - self.radius),
            np.minimum(hi, self.center + self.radius),
        )

    def project_inexact(self, y, xi):
        x, _ = self.project_inexact_info(y, xi)
        return x

    def project_inexact_info(self, y, xi):
        """Return (point, BisectionInfo).

        The point x satisfies x in the intersection (base membership exact,
        ball membership within floating tolerance) and
        ||x - P(y)|| <= xi where P is the exact projection.
        """
        xi = check_positive(xi, "xi")
        y = as_vector(y, dim=self.dim, name="y")
        r = self.radius
        big_r = float(np.linalg.norm(y - self.center))

        x0 = self.base.project(y)
        calls = 1
        if float(np.linalg.norm(x0 - self.center)) ** 2 - r * r <= 0.0:
            # The base projection already lands in the ball, so it is the
            # exact projection onto the intersection.
            return x0, BisectionInfo(steps=0, base_projections=calls, multiplier=0.0)

        def iterate(lam):
            return self.base.project((y + lam * self.center) / (1.0 + lam))

        lo, hi = 0.0, big_r / r
        steps = int(math.ceil(math.log2(1.0 + big_r * big_r / (r * xi))))
        x_hi = None
        for _ in range(steps):
            mid = 0.5 * (lo + hi)
            x_mid = iterate(mid)
            calls += 1
            if float(np.linalg.norm(x_mid - self.center)) ** 2 - r * r > 0.0:
                lo = mid
            else:
                # Ties at g(lam) = 0 resolve toward the feasible endpoint.
                hi = mid
                x_hi = x_mid
        if x_hi is None:
            x_hi = iterate(hi)
            calls += 1
        return x_hi, BisectionInfo(steps=steps, base_projections=calls, multiplier=hi)

    def __repr__(self):
        return (
            f"LocalizedDomain(base={self.base!r}, center={self.center!r}, "
            f"radius={self.radius})"
        )


def project_exact(domain, y):
    """Exact Euclidean projection of y onto the domain."""
    return domain.project(y)


def inexact_project_localized(locdom, y, xi):
    """xi-inexact projection onto a localized domain (see LocalizedDomain)."""
    if not isinstance(locdom, LocalizedDomain):
        raise TypeError("locdom must be a LocalizedDomain")
    return locdom.project_inexact(y, xi)


def project_many(domain, points):
    """Row-wise exact projection of an (n, d) array, vectorized where possible."""
    points = np.asarray(points, dtype=float)
    if isinstance(domain, Box):
        return np.clip(points, domain.lower, domain.upper)
    if isinstance(domain, Ball):
        delta = points - domain.center
        norms = np.linalg.norm(delta, axis=1)
        scale = np.ones_like(norms)
        outside = norms > domain.radius
        scale[outside] = domain.radius / norms[outside]
        return domain.center + delta * scale[:, None]
    return np.array([domain.project(p) for p in points])


def contains_many(domain, points, tol=MEMBERSHIP_TOL):
    """Row-wise membership test of an (n, d) array."""
    points = np.asarray(points, dtype=float)
    if isinstance(domain, Box):
        return np.all(
            (points >= domain.lower - tol) & (points <= domain.upper + tol), axis=1
        )
    if isinstance(domain, Ball):
        return np.linalg.norm(points - domain.center, axis=1) <= domain.radius + tol
    if isinstance(domain, LocalizedDomain):
        in_ball = (
            np.linalg.norm(points - domain.center, axis=1) <= domain.radius + tol
        )
        return in_ball & contains_many(domain.base, points, tol)
    return np.array([domain.contains(p, tol) for p in points], dtype=bool)


def interval_bounds(domain):
    """(lo, hi) endpoints of a one-dimensional domain."""
    if domain.dim != 1:
        raise ValueError("interval_bounds requires a 1-D domain")
    if isinstance(domain, Ball):
        c = float(domain.center[0])
        return c - domain.radius, c + domain.radius
    if isinstance(domain, Box):
        return float(domain.lower[0]), float(domain.upper[0])
    if isinstance(domain, LocalizedDomain):
        lo, hi = interval_bounds(domain.base)
        c = float(domain.center[0])
        lo2, hi2 = max(lo, c - domain.radius), min(hi, c + domain.radius)
        if lo2 > hi2:
            raise ValueError("empty localized interval")
        return lo2, hi2
    if isinstance(domain, Product) and len(domain.factors) == 1:
        return interval_bounds(domain.factors[0])
    raise TypeError(f"unsupported domain type {type(domain).__name__}")
