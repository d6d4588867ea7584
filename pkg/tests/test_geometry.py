import math

import numpy as np
import pytest

from privopt.geometry import (
    Ball,
    Box,
    LocalizedDomain,
    Product,
    inexact_project_localized,
    interval_bounds,
    project_exact,
    project_many,
)


def random_domain(rng, d):
    if rng.uniform() < 0.5:
        return Ball(rng.uniform(-0.5, 0.5, size=d), rng.uniform(0.3, 1.5))
    lo = rng.uniform(-1.5, -0.2, size=d)
    return Box(lo, lo + rng.uniform(0.4, 2.0, size=d))


def lambda_grid_oracle(base, center, radius, y, n_grid):
    """Brute-force multiplier sweep: closest feasible x_lambda to y."""
    big_r = np.linalg.norm(y - center)
    lams = np.linspace(0.0, big_r / radius, n_grid)
    z = (y[None, :] + lams[:, None] * center[None, :]) / (1.0 + lams)[:, None]
    pts = project_many(base, z)
    feasible = np.linalg.norm(pts - center, axis=1) <= radius + 1e-12
    pts = pts[feasible]
    dists = np.linalg.norm(pts - y, axis=1)
    return pts[np.argmin(dists)]


class TestExactProjection:
    def test_ball_radial_scaling(self):
        dom = Ball([0.0, 0.0], 1.0)
        np.testing.assert_allclose(dom.project([2.0, 0.0]), [1.0, 0.0])

    def test_ball_interior_point_fixed(self):
        dom = Ball([0.0, 0.0], 1.0)
        np.testing.assert_allclose(dom.project([0.3, 0.4]), [0.3, 0.4])

    def test_box_coordinate_clamping(self):
        dom = Box([0.0, 0.0], [1.0, 1.0])
        np.testing.assert_allclose(dom.project([-1.0, 2.0]), [0.0, 1.0])

    def test_dimension_mismatch_rejected(self):
        with pytest.raises(ValueError):
            Ball([0.0, 0.0], 1.0).project([1.0, 2.0, 3.0])

    def test_non_finite_rejected(self):
        with pytest.raises(ValueError):
            Ball([0.0], 1.0).project([np.nan])

    def test_idempotent_nonexpansive_member(self):
        rng = np.random.default_rng(7)
        for _ in range(300):
            d = int(rng.integers(1, 6))
            dom = random_domain(rng, d)
            y1, y2 = rng.normal(size=d) * 3, rng.normal(size=d) * 3
            p1, p2 = dom.project(y1), dom.project(y2)
            assert np.linalg.norm(dom.project(p1) - p1) <= 1e-12
            assert np.linalg.norm(p1 - p2) <= np.linalg.norm(y1 - y2) + 1e-12
            assert dom.contains(p1)

    def test_product_projects_blockwise(self):
        rng = np.random.default_rng(3)
        ball = Ball([0.0, 0.0], 1.0)
        box = Box([-1.0], [0.5])
        prod = Product([ball, box])
        y = rng.normal(size=3) * 4
        expected = np.concatenate([ball.project(y[:2]), box.project(y[2:])])
        np.testing.assert_allclose(prod.project(y), expected)


class TestDiameterBounds:
    def test_ball_diameter(self):
        assert Ball([0.0], 0.7).diameter_bound == pytest.approx(1.4)

    def test_box_diameter(self):
        dom = Box([0.0, 0.0], [3.0, 4.0])
        assert dom.diameter_bound == pytest.approx(5.0)

    def test_product_euclidean_combination(self):
        prod = Product([Ball([0.0], 1.0), Box([0.0, 0.0], [3.0, 4.0])])
        assert prod.diameter_bound == pytest.approx(math.sqrt(4.0 + 25.0))

    def test_diameter_dominates_sampled_pairs(self):
        rng = np.random.default_rng(11)
        for _ in range(50):
            d = int(rng.integers(1, 4))
            dom = random_domain(rng, d)
            pts = [dom.project(rng.normal(size=d) * 5) for _ in range(20)]
            diam = max(
                np.linalg.norm(p - q) for p in pts for q in pts
            )
            assert diam <= dom.diameter_bound + 1e-9


class TestLocalizedDomain:
    def test_center_must_be_feasible(self):
        with pytest.raises(ValueError):
            LocalizedDomain(Ball([0.0], 1.0), [2.0], 0.5)

    def test_degenerate_radius_rejected(self):
        with pytest.raises(ValueError):
            LocalizedDomain(Ball([0.0], 1.0), [0.0], 0.0)

    def test_diameter_is_min(self):
        base = Ball([0.0, 0.0], 1.0)
        loc = LocalizedDomain(base, [0.1, 0.0], 0.25)
        assert loc.diameter_bound == pytest.approx(0.5)
        loc_wide = LocalizedDomain(base, [0.1, 0.0], 10.0)
        assert loc_wide.diameter_bound == pytest.approx(2.0)

    def test_exact_projection_unavailable(self):
        loc = LocalizedDomain(Ball([0.0], 1.0), [0.0], 0.5)
        with pytest.raises(NotImplementedError):
            loc.project([2.0])


class TestInexactProjection:
    def test_ball_base_radial(self):
        loc = LocalizedDomain(Ball([0.0, 0.0], 1.0), [0.0, 0.0], 0.5)
        out = inexact_project_localized(loc, [2.0, 0.0], 1e-6)
        np.testing.assert_allclose(out, [0.5, 0.0], atol=1e-6)

    def test_interior_point_returned_exactly(self):
        loc = LocalizedDomain(Box([-1.0, -1.0], [1.0, 1.0]), [0.0, 0.0], 0.5)
        out, info = loc.project_inexact_info(np.array([0.1, 0.1]), 1e-6)
        np.testing.assert_allclose(out, [0.1, 0.1])
        assert info.steps == 0

    def test_box_corner_case_against_grid_oracle(self):
        base = Box([0.0, 0.0], [2.0, 2.0])
        loc = LocalizedDomain(base, [1.0, 1.0], 0.5)
        y = np.array([3.0, 1.0])
        out = loc.project_inexact(y, 1e-4)
        oracle = lambda_grid_oracle(base, loc.center, 0.5, y, 10**6)
        np.testing.assert_allclose(oracle, [1.5, 1.0], atol=1e-5)
        assert np.linalg.norm(out - oracle) <= 1e-4

    def test_against_grid_oracle_random(self):
        rng = np.random.default_rng(17)
        for _ in range(40):
            d = int(rng.integers(1, 4))
            base = random_domain(rng, d)
            center = base.project(rng.normal(size=d))
            radius = rng.uniform(0.1, 0.6)
            loc = LocalizedDomain(base, center, radius)
            y = rng.normal(size=d) * 3
            xi = 10.0 ** rng.uniform(-5, -3)
            out, info = loc.project_inexact_info(y, xi)
            big_r = np.linalg.norm(y - center)
            # Oracle multiplier resolution finer than xi / ||y - center||.
            n_grid = int(min(4 * big_r**2 / (radius * xi), 2 * 10**6)) + 2
            oracle = lambda_grid_oracle(base, center, radius, y, n_grid)
            assert np.linalg.norm(out - oracle) <= xi
            assert base.contains(out)
            assert loc.contains(out, tol=1e-7)

    def test_bisection_step_count(self):
        rng = np.random.default_rng(23)
        for _ in range(60):
            d = int(rng.integers(1, 4))
            base = random_domain(rng, d)
            center = base.project(rng.normal(size=d))
            radius = rng.uniform(0.1, 0.6)
            loc = LocalizedDomain(base, center, radius)
            y = rng.normal(size=d) * 3
            xi = 10.0 ** rng.uniform(-6, -2)
            out, info = loc.project_inexact_info(y, xi)
            if info.steps == 0:
                continue
            big_r = np.linalg.norm(y - center)
            expected = math.ceil(math.log2(1 + big_r**2 / (radius * xi)))
            assert info.steps == expected
            assert info.base_projections <= expected + 2

    def test_wrapper_type_check(self):
        with pytest.raises(TypeError):
            inexact_project_localized(Ball([0.0], 1.0), [2.0], 1e-4)
        assert project_exact(Ball([0.0], 1.0), [2.0]) == pytest.approx([1.0])


class TestIntervalBounds:
    def test_ball_and_box(self):
        assert interval_bounds(Ball([0.25], 1.0)) == pytest.approx((-0.75, 1.25))
        assert interval_bounds(Box([-1.0], [0.5])) == pytest.approx((-1.0, 0.5))

    def test_localized_intersection(self):
        loc = LocalizedDomain(Box([-1.0], [1.0]), [0.8], 0.5)
        assert interval_bounds(loc) == pytest.approx((0.3, 1.0))

    def test_requires_1d(self):
        with pytest.raises(ValueError):
            interval_bounds(Ball([0.0, 0.0], 1.0))
