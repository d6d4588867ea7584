import math

import numpy as np
import pytest

from privopt.extension import (
    extension_subgradient_approx,
    extension_values_1d,
    make_joint_oracle,
    pack_joint,
    unpack_joint,
)
from privopt.geometry import Ball, Box, Product
from privopt.losses import Dataset, LossModel
from privopt.subgrad import (
    STOP_CERTIFIED,
    STOP_ITERATION_CAP,
    STOP_ZERO_GRADIENT,
    FirstOrderOracle,
    SolverTrace,
    adaptive_projsubgrad,
    biased_psg,
    biased_psg_schedule,
    minimize_convex_scalar,
)


def max_affine(rng, n_pieces, d):
    slopes = rng.normal(size=(n_pieces, d))
    offsets = rng.normal(size=n_pieces)

    def value(x):
        return float(np.max(slopes @ x + offsets))

    def grad(x):
        return slopes[int(np.argmax(slopes @ x + offsets))]

    return value, grad, slopes, offsets


def grid_min_ball(slopes, offsets, radius=1.0, n=2000):
    xs = np.linspace(-radius, radius, n)
    gx, gy = np.meshgrid(xs, xs, indexing="ij")
    pts = np.stack([gx.ravel(), gy.ravel()], axis=1)
    pts = pts[np.linalg.norm(pts, axis=1) <= radius]
    vals = (pts @ slopes.T + offsets).max(axis=1)
    return float(vals.min()), 2 * radius / (n - 1)


class TestAdaptive:
    def test_zero_gradient_returns_start(self):
        dom = Box([-1.0], [1.0])
        x, cert = adaptive_projsubgrad(
            dom, lambda x: np.zeros(1), alpha=0.1, x0=np.array([0.25])
        )
        assert cert.stop_reason == STOP_ZERO_GRADIENT
        assert cert.certified
        np.testing.assert_allclose(x, [0.25])

    def test_absolute_value_certified(self):
        dom = Box([-1.0], [1.0])
        x, cert = adaptive_projsubgrad(
            dom, lambda x: np.sign(x), alpha=0.1, x0=np.array([1.0])
        )
        assert cert.stop_reason == STOP_CERTIFIED
        assert abs(float(x[0])) <= 0.1

    def test_max_affine_accuracy_and_iteration_bound(self):
        rng = np.random.default_rng(2)
        dom = Ball([0.0, 0.0], 1.0)
        for _ in range(3):
            value, grad, slopes, offsets = max_affine(rng, 5, 2)
            alpha = 0.1
            x, cert = adaptive_projsubgrad(dom, grad, alpha=alpha)
            phi_star, resolution = grid_min_ball(slopes, offsets)
            lip = float(np.max(np.linalg.norm(slopes, axis=1)))
            assert value(x) - phi_star <= alpha + resolution * lip
            assert cert.iterations <= math.ceil((3 * 2.0 * lip / alpha) ** 2)

    def test_certificate_soundness(self):
        rng = np.random.default_rng(3)
        dom = Ball([0.0, 0.0], 1.0)
        _, grad, *_ = max_affine(rng, 4, 2)
        x, cert = adaptive_projsubgrad(dom, grad, alpha=0.2)
        assert cert.stop_reason == STOP_CERTIFIED
        assert cert.stopping_test_holds()
        lhs = 3 * cert.diameter * math.sqrt(cert.cumulative_sq_grad)
        assert lhs <= cert.target_alpha * cert.iterations * (1 + 1e-12)

    def test_iteration_cap(self):
        dom = Box([-1.0], [1.0])
        x, cert = adaptive_projsubgrad(
            dom, lambda x: np.sign(x) if x[0] != 0 else np.ones(1),
            alpha=1e-6, x0=np.array([1.0]), cap=5,
        )
        assert cert.stop_reason == STOP_ITERATION_CAP
        assert cert.iterations == 5
        assert not cert.certified

    def test_trace_csv(self, tmp_path):
        dom = Box([-1.0], [1.0])
        trace = SolverTrace()
        adaptive_projsubgrad(
            dom,
            FirstOrderOracle(lambda x: np.sign(x), value=lambda x: abs(float(x[0]))),
            alpha=0.25, x0=np.array([1.0]), trace=trace,
        )
        path = tmp_path / "trace.csv"
        trace.to_csv(path)
        lines = path.read_text().splitlines()
        assert lines[0] == "t,grad_norm,S_t,eta_t,xi_t,objective"
        assert len(lines) == len(trace.rows) + 1
        # best running objective is non-increasing (diagnostic)
        best = trace.best_values()
        assert all(b2 <= b1 + 1e-12 for b1, b2 in zip(best, best[1:]))

    def test_strong_convexity_distance(self):
        lam = 4.0
        w0 = np.array([0.2, -0.1])
        dom = Ball([0.0, 0.0], 1.0)
        alpha = 1e-3
        x, cert = adaptive_projsubgrad(dom, lambda x: lam * (x - w0), alpha=alpha)
        assert cert.certified
        assert np.linalg.norm(x - w0) <= math.sqrt(2 * alpha / lam) + 1e-9


class TestBiased:
    def test_bias_cap_enforced(self):
        dom = Box([-1.0], [1.0])
        with pytest.raises(ValueError):
            biased_psg(dom, lambda x: np.sign(x), alpha=0.1, norm_bound=1.0,
                       bias=0.1)

    def test_exact_iteration_count(self):
        dom = Box([-1.0], [1.0])
        alpha = 0.25
        x, cert = biased_psg(dom, lambda x: np.sign(x), alpha=alpha,
                             norm_bound=1.0)
        expected, _, _ = biased_psg_schedule(2.0, 1.0, alpha)
        assert cert.iterations == expected == math.ceil((4 * 2.0 / alpha) ** 2)
        assert cert.method == "biased"

    def test_absolute_value_accuracy(self):
        dom = Box([-1.0], [1.0])
        x, _ = biased_psg(dom, lambda x: np.sign(x), alpha=0.1, norm_bound=1.0,
                          x0=np.array([1.0]))
        assert abs(float(x[0])) <= 0.1

    def test_quadratic_strong_convexity_distance(self):
        lam = 2.0
        w0 = np.array([0.3, 0.1])
        dom = Ball([0.0, 0.0], 1.0)
        alpha = 0.1
        x, _ = biased_psg(dom, lambda x: lam * (x - w0), alpha=alpha,
                          norm_bound=lam * dom.diameter_bound)
        assert np.linalg.norm(x - w0) <= math.sqrt(2 * alpha / lam) + 1e-9

    def test_norm_bound_contract_enforced(self):
        dom = Box([-1.0], [1.0])
        with pytest.raises(ValueError):
            biased_psg(dom, lambda x: 5.0 * np.ones(1), alpha=0.5,
                       norm_bound=1.0)

    def test_cross_solver_consistency_on_hinge_instance(self):
        # Both routes minimize the same regularized extension objective; their
        # achieved values must agree within twice the target accuracy.
        rng = np.random.default_rng(8)
        m, lam, C = 2, 0.2, 8.0
        dataset = Dataset(rng.normal(size=(m, 1)) * 2, rng.normal(size=m) * 0.5)
        model = LossModel("hinge")
        dom = Box([-1.0], [1.0])
        w0 = np.array([0.2])
        alpha = C**2 / (72 * lam * m**2)

        grad_fn, _ = make_joint_oracle(model, dataset, C, lam, w0)
        joint_dom = Product([dom] * (m + 1))
        x0 = pack_joint(w0, np.tile(w0, (m, 1)))
        joint_x, joint_cert = adaptive_projsubgrad(
            joint_dom, grad_fn, alpha=alpha, x0=x0
        )
        assert joint_cert.certified
        w_joint, _ = unpack_joint(joint_x, m, 1)

        bias = alpha / 4

        def direct_grad(w):
            g = np.zeros(1)
            for i in range(m):
                g += extension_subgradient_approx(
                    model, dataset.sample(i), w, dom, C, bias
                )
            return g / m + lam * (w - w0)

        norm_bound = C + lam * dom.diameter_bound
        w_direct, _ = biased_psg(dom, direct_grad, alpha=alpha,
                                 norm_bound=norm_bound, bias=bias, x0=w0)

        def objective(w):
            vals = extension_values_1d(
                model, dataset.a[:, 0], dataset.b, float(w[0]), -1.0, 1.0, C
            )
            return float(np.mean(vals) + 0.5 * lam * (w[0] - w0[0]) ** 2)

        assert abs(objective(w_joint) - objective(w_direct)) <= 2 * alpha


class TestScalar:
    def test_certified_gap(self):
        fn = lambda x: abs(x - 0.3) + 0.5 * x
        x, gap, evals = minimize_convex_scalar(fn, -1.0, 1.0, 1e-6, 1.5)
        assert gap <= 1e-6
        assert abs(x - 0.3) <= 1e-5
        assert evals > 0

    def test_flat_interval_shortcut(self):
        x, gap, evals = minimize_convex_scalar(lambda x: 0.0, 0.0, 1.0, 1.0, 0.5)
        assert evals == 0 and gap <= 1.0
