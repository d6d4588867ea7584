import math

import numpy as np
import pytest

from privopt.losses import (
    Dataset,
    LossModel,
    MomentSpec,
    eval_loss,
    eval_subgradient,
    gen_packing_hard,
    gen_pareto_linear,
    gen_two_point,
    pack_unit_sphere,
)


class TestLossValues:
    def test_hinge_positive_margin(self):
        model = LossModel("hinge")
        assert eval_loss(model, [0.5, 0.0], (np.array([1.0, 0.0]), 0.0)) == 0.5

    def test_hinge_negative_margin(self):
        model = LossModel("hinge")
        assert eval_loss(model, [-0.5, 0.0], (np.array([1.0, 0.0]), 0.0)) == 0.0

    def test_absolute(self):
        model = LossModel("absolute")
        assert eval_loss(model, [1.0, 0.0], (np.array([2.0, 0.0]), -1.0)) == 1.0

    def test_unknown_kind_rejected(self):
        with pytest.raises(ValueError):
            LossModel("huber")


class TestSubgradients:
    def test_hinge_active(self):
        model = LossModel("hinge")
        g = eval_subgradient(model, [0.5, 0.0], (np.array([1.0, 0.0]), 0.0))
        np.testing.assert_allclose(g, [1.0, 0.0])

    def test_hinge_inactive(self):
        model = LossModel("hinge")
        g = eval_subgradient(model, [-0.5, 0.0], (np.array([1.0, 0.0]), 0.0))
        np.testing.assert_allclose(g, [0.0, 0.0])

    def test_hinge_kink_convention_zero(self):
        model = LossModel("hinge")
        g = eval_subgradient(model, [0.0, 0.0], (np.array([1.0, 0.0]), 0.0))
        np.testing.assert_allclose(g, [0.0, 0.0])

    def test_absolute_kink_convention_zero(self):
        model = LossModel("absolute")
        g = eval_subgradient(model, [0.5], (np.array([2.0]), -1.0))
        np.testing.assert_allclose(g, [0.0])

    def test_subgradient_inequality_property(self):
        rng = np.random.default_rng(5)
        for kind in ("linear", "hinge", "absolute"):
            model = LossModel(kind)
            for _ in range(1000):
                d = int(rng.integers(1, 4))
                z = (rng.normal(size=d) * rng.lognormal(0, 1), float(rng.normal()))
                w, u = rng.normal(size=d), rng.normal(size=d)
                g = model.subgradient(w, z)
                assert model.value(u, z) >= model.value(w, z) + g @ (u - w) - 1e-9
                assert np.linalg.norm(g) <= model.per_sample_lipschitz(z) + 1e-12


class TestDataset:
    def test_csv_round_trip(self, tmp_path):
        data = Dataset(np.array([[1.0, 2.0], [3.5, -0.25]]), np.array([0.5, -1.0]))
        path = tmp_path / "data.csv"
        data.to_csv(path)
        header = path.read_text().splitlines()[0]
        assert header == "a_1,a_2,b"
        loaded = Dataset.from_csv(path)
        np.testing.assert_array_equal(loaded.a, data.a)
        np.testing.assert_array_equal(loaded.b, data.b)

    def test_replace_builds_neighbor(self):
        data = Dataset(np.array([[1.0], [2.0]]), np.array([0.0, 0.0]))
        neighbor = data.replace(1, (np.array([5.0]), 1.0))
        assert neighbor.a[1, 0] == 5.0 and neighbor.b[1] == 1.0
        assert data.a[1, 0] == 2.0  # original untouched


class TestMomentSpec:
    def test_ordering_enforced(self):
        with pytest.raises(ValueError):
            MomentSpec(k=2.0, G_k=1.0, G_2=2.0)
        with pytest.raises(ValueError):
            MomentSpec(k=1.5, G_k=1.0, G_2=1.0)
        spec = MomentSpec(k=3.0, G_k=2.0, G_2=1.0, G_1=0.5)
        assert spec.G_1 == 0.5


class TestParetoLinear:
    def test_empirical_second_moment_matches(self):
        data, spec = gen_pareto_linear(1, 10**5, 2.0, 1.0, seed=0)
        norms = np.linalg.norm(data.a, axis=1)
        assert np.mean(norms**2) == pytest.approx(1.0, rel=0.05)

    def test_population_optimum_closed_form(self):
        _, spec = gen_pareto_linear(3, 10, 2.0, 1.0, seed=1, domain_radius=0.5)
        mu_norm = np.linalg.norm(spec.mu)
        assert spec.population_optimum() == pytest.approx(-0.5 * mu_norm)
        w_star = spec.population_minimizer()
        assert np.linalg.norm(w_star) == pytest.approx(0.5)
        assert float(spec.mu @ w_star) == pytest.approx(-0.5 * mu_norm)

    def test_deterministic_per_seed(self):
        d1, _ = gen_pareto_linear(2, 512, 2.5, 1.3, seed=42)
        d2, _ = gen_pareto_linear(2, 512, 2.5, 1.3, seed=42)
        assert d1.a.tobytes() == d2.a.tobytes()
        assert d1.b.tobytes() == d2.b.tobytes()
        d3, _ = gen_pareto_linear(2, 512, 2.5, 1.3, seed=43)
        assert d1.a.tobytes() != d3.a.tobytes()

    def test_declared_moments_match_large_sample(self):
        data, spec = gen_pareto_linear(2, 10**6, 3.0, 2.0, seed=3)
        norms = np.linalg.norm(data.a, axis=1)
        k = spec.moment.k
        assert np.mean(norms**k) ** (1 / k) == pytest.approx(
            spec.moment.G_k, rel=0.05
        )
        assert np.mean(norms**2) ** 0.5 == pytest.approx(spec.moment.G_2, rel=0.05)
        assert np.mean(norms) == pytest.approx(spec.moment.G_1, rel=0.05)

    def test_small_k_rejected(self):
        with pytest.raises(ValueError):
            gen_pareto_linear(1, 10, 1.5, 1.0, seed=0)


class TestPackingHard:
    def test_degenerate_p_equals_one(self):
        # Tiny n*eps forces p = 1: every active sample sits at a*nu with a = G_k.
        data, spec = gen_packing_hard(2, 8, 0.001, 0.01, 1.5, 2.0, seed=0)
        assert spec.params["p"] == 1.0
        norms = np.linalg.norm(data.a, axis=1)
        np.testing.assert_allclose(norms, 1.5)

    def test_negative_formula_clamps_and_flags(self):
        # d=1, |V|=2: log((|V|-1)/(4 e zeta)) = log(1/e) = -1 < 0.
        data, spec = gen_packing_hard(1, 100, 1.0, 0.25, 1.0, 2.0, seed=0)
        assert spec.vacuous
        assert spec.params["p_raw"] == pytest.approx(-0.01)
        assert spec.params["p"] == pytest.approx(1e-12)
        assert spec.params["packing_size"] == 2

    def test_p_formula_value(self):
        # |V| = 2^4 = 16: p = log(15 / (4 e * 0.1)) / (n eps).
        _, spec = gen_packing_hard(4, 1000, 0.5, 0.1, 1.0, 2.0, seed=1)
        expected = math.log(15.0 / (4.0 * math.e * 0.1)) / (1000 * 0.5)
        assert spec.params["p"] == pytest.approx(expected)
        nu = np.asarray(spec.params["nu"])
        np.testing.assert_allclose(
            spec.mu, 1.0 * expected ** (1 - 1 / 2.0) * nu, rtol=1e-12
        )

    def test_empirical_kth_moment_within_tolerance(self):
        data, spec = gen_packing_hard(3, 10**6, 0.05, 0.1, 1.0, 2.5, seed=7)
        k = spec.moment.k
        norms = np.linalg.norm(data.a, axis=1)
        assert np.mean(norms**k) <= spec.moment.G_k**k * 1.05

    def test_packing_separation_and_size(self):
        rng = np.random.default_rng(0)
        pts = pack_unit_sphere(3, 8, 0.5, rng)
        assert len(pts) == 8
        for i in range(len(pts)):
            for j in range(i + 1, len(pts)):
                assert np.linalg.norm(pts[i] - pts[j]) >= 0.5
        np.testing.assert_allclose(np.linalg.norm(pts, axis=1), 1.0)

    def test_zeta_range_enforced(self):
        with pytest.raises(ValueError):
            gen_packing_hard(2, 10, 1.0, 0.3, 1.0, 2.0, seed=0)


class TestTwoPoint:
    def test_support_and_moments_exact(self):
        data, spec = gen_two_point(500, 0.25, 2.0, 1, seed=0)
        norms = np.linalg.norm(data.a, axis=1)
        np.testing.assert_allclose(norms, 2.0)
        assert spec.moment.G_2 == 2.0 and spec.moment.G_k == 2.0

    def test_symmetric_when_sign_zero(self):
        _, spec = gen_two_point(100, 0.25, 1.0, 0, seed=0)
        np.testing.assert_allclose(spec.mu, [0.0])

    def test_rho_formula(self):
        _, spec = gen_two_point(400, 0.1, 1.0, -1, seed=0)
        rho = 0.25 * min(math.sqrt(math.log(10.0) / 400), 1.0)
        assert spec.params["rho"] == pytest.approx(rho)
        np.testing.assert_allclose(spec.mu, [-rho])

    def test_empirical_mean_within_3_sigma(self):
        n = 10**6
        data, spec = gen_two_point(n, 0.25, 1.0, 1, seed=11)
        rho = spec.params["rho"]
        sigma = math.sqrt(1.0 - (rho) ** 2) / math.sqrt(n)
        assert abs(float(np.mean(data.a[:, 0])) - rho) <= 3 * sigma

    def test_determinism(self):
        d1, _ = gen_two_point(256, 0.2, 1.0, 1, seed=9)
        d2, _ = gen_two_point(256, 0.2, 1.0, 1, seed=9)
        assert d1.a.tobytes() == d2.a.tobytes()
