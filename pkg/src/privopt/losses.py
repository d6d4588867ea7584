"""Per-sample convex loss oracles and synthetic instance generators.

Losses are affine-margin families f(w, z) = h(a(z)^T w + b(z)) with h one of
identity (linear), positive part (hinge), or absolute value. All three have
per-sample Lipschitz constant ||a(z)||, which drives the heavy-tailed
instance constructions.
"""

import csv
import math
from dataclasses import dataclass, field
from typing import NamedTuple, Optional

import numpy as np

from .validation import as_matrix, as_vector, check_in_interval, check_positive

LOSS_KINDS = ("linear", "hinge", "absolute")

P_FLOOR = 1e-12  # clamp for the packing-instance activation probability


class Sample(NamedTuple):
    a: np.ndarray
    b: float


@dataclass(frozen=True)
class LossModel:
    """Affine-margin convex loss with subgradient and Lipschitz oracles.

    Kink conventions: hinge returns 0 at a^T w + b = 0, absolute returns 0
    at a^T w + b = 0. Both are minimum-norm elements of the subdifferential.
    """

    kind: str

    def __post_init__(self):
        if self.kind not in LOSS_KINDS:
            raise ValueError(f"unknown loss kind {self.kind!r}; expected {LOSS_KINDS}")

    def value(self, w, sample):
        a, b = sample
        w = as_vector(w, dim=len(a), name="w")
        margin = float(np.dot(a, w)) + float(b)
        if self.kind == "linear":
            return margin
        if self.kind == "hinge":
            return max(0.0, margin)
        return abs(margin)

    def subgradient(self, w, sample):
        a, b = sample
        a = np.asarray(a, dtype=float)
        w = as_vector(w, dim=len(a), name="w")
        margin = float(np.dot(a, w)) + float(b)
        if self.kind == "linear":
            return a.copy()
        if self.kind == "hinge":
            return a.copy() if margin > 0.0 else np.zeros_like(a)
        sign = float(np.sign(margin))
        return sign * a

    def per_sample_lipschitz(self, sample):
        return float(np.linalg.norm(np.asarray(sample[0], dtype=float)))

    # Vectorized forms over a dataset, used by solvers and scores.

    def margins(self, w, A, b):
        return A @ w + b

    def values_vec(self, w, A, b):
        m = self.margins(w, A, b)
        if self.kind == "linear":
            return m
        if self.kind == "hinge":
            return np.maximum(0.0, m)
        return np.abs(m)

    def scalar_slopes(self, margins):
        """h'(margin) with the kink conventions above."""
        if self.kind == "linear":
            return np.ones_like(margins)
        if self.kind == "hinge":
            return (margins > 0.0).astype(float)
        return np.sign(margins)

    def gradients_vec(self, w, A, b):
        """(n, d) matrix whose rows are subgradients at w."""
        return self.scalar_slopes(self.margins(w, A, b))[:, None] * A


@dataclass(frozen=True)
class Dataset:
    """n samples z_i = (a_i, b_i) stored as a dense (n, d) matrix plus offsets."""

    a: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "a", as_matrix(self.a, name="a"))
        object.__setattr__(self, "b", as_vector(self.b, dim=self.a.shape[0], name="b"))

    @property
    def n(self):
        return self.a.shape[0]

    @property
    def d(self):
        return self.a.shape[1]

    def sample(self, i):
        return Sample(self.a[i], float(self.b[i]))

    def subset(self, start, stop):
        return Dataset(self.a[start:stop].copy(), self.b[start:stop].copy())

    def replace(self, i, sample):
        """Neighboring dataset with record i swapped out."""
        a = self.a.copy()
        b = self.b.copy()
        a[i] = as_vector(sample[0], dim=self.d, name="a")
        b[i] = float(sample[1])
        return Dataset(a, b)

    def max_lipschitz(self):
        return float(np.max(np.linalg.norm(self.a, axis=1))) if self.n else 0.0

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow([f"a_{j + 1}" for j in range(self.d)] + ["b"])
            for i in range(self.n):
                writer.writerow(
                    [f"{v:.17g}" for v in self.a[i]] + [f"{self.b[i]:.17g}"]
                )

    @classmethod
    def from_csv(cls, path):
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader)
            if not header or header[-1] != "b":
                raise ValueError("dataset CSV must have columns a_1..a_d,b")
            rows = [[float(v) for v in row] for row in reader if row]
        arr = np.asarray(rows, dtype=float)
        if arr.ndim != 2 or arr.shape[1] != len(header):
            raise ValueError("malformed dataset CSV")
        return cls(arr[:, :-1], arr[:, -1])


@dataclass(frozen=True)
class MomentSpec:
    """Gradient-moment bounds: E sup_w ||grad f(w, z)||^k <= G_k^k."""

    k: float
    G_k: float
    G_2: float
    G_1: Optional[float] = None

    def __post_init__(self):
        if self.k < 2:
            raise ValueError("moment order k must be >= 2")
        check_positive(self.G_k, "G_k")
        check_positive(self.G_2, "G_2")
        if self.G_2 > self.G_k * (1 + 1e-12):
            raise ValueError("moment ordering violated: need G_2 <= G_k")
        if self.G_1 is not None and self.G_1 > self.G_2 * (1 + 1e-12):
            raise ValueError("moment ordering violated: need G_1 <= G_2")


@dataclass
class InstanceSpec:
    """Self-describing synthetic instance with its population optimum.

    For the linear-loss generators here the population risk over the ball
    B(0, R) is F(w) = <mu, w> + E[b], minimized at -R mu / ||mu||.
    """

    kind: str
    d: int
    n: int
    seed: int
    loss: str
    moment: MomentSpec
    mu: Optional[np.ndarray]
    domain_radius: float
    params: dict = field(default_factory=dict)
    vacuous: bool = False

    def population_minimizer(self):
        if self.mu is None:
            return None
        norm = float(np.linalg.norm(self.mu))
        if norm == 0.0:
            return np.zeros(self.d)
        return -self.domain_radius * self.mu / norm

    def population_optimum(self):
        if self.mu is None:
            return None
        return -self.domain_radius * float(np.linalg.norm(self.mu))


def _unit_sphere(rng, n, d):
    v = rng.standard_normal((n, d))
    norms = np.linalg.norm(v, axis=1)
    # Resample rare zero-norm rows rather than dividing by zero.
    while np.any(norms == 0.0):
        bad = norms == 0.0
        v[bad] = rng.standard_normal((int(bad.sum()), d))
        norms = np.linalg.norm(v, axis=1)
    return v / norms[:, None]


def gen_pareto_linear(d, n, tail_index, G_k, seed, *, bias=0.5, domain_radius=1.0):
    """Linear losses with Pareto-tailed gradient norms.

    ||a|| follows a Pareto law with shape slightly above the moment order so
    that E ||a||^k = G_k^k exactly; directions are uniform on the sphere
    except that a `bias` fraction is pinned to +e_1, giving the known mean
    gradient mu = bias * E||a|| * e_1 and hence a closed-form population
    optimum on the centered ball.
    """
    k = float(tail_index)
    if k < 2:
        raise ValueError("tail index k must be >= 2")
    check_positive(G_k, "G_k")
    check_in_interval(bias, 0.0, 1.0, "bias", closed_lo=True, closed_hi=True)
    rng = np.random.default_rng(seed)

    gamma = k + 0.5
    x_m = G_k / (gamma / (gamma - k)) ** (1.0 / k)  # E R^k = G_k^k
    radii = x_m * rng.uniform(size=n) ** (-1.0 / gamma)

    directions = _unit_sphere(rng, n, d)
    pinned = rng.uniform(size=n) < bias
    e1 = np.zeros(d)
    e1[0] = 1.0
    directions[pinned] = e1

    a = radii[:, None] * directions
    dataset = Dataset(a, np.zeros(n))

    mean_r = gamma * x_m / (gamma - 1.0)
    g2 = math.sqrt(gamma / (gamma - 2.0)) * x_m
    moment = MomentSpec(k=k, G_k=float(G_k), G_2=min(g2, float(G_k)), G_1=mean_r)
    spec = InstanceSpec(
        kind="pareto_linear",
        d=d,
        n=n,
        seed=seed,
        loss="linear",
        moment=moment,
        mu=bias * mean_r * e1,
        domain_radius=float(domain_radius),
        params={"tail_index": k, "G_k": float(G_k), "bias": float(bias),
                "pareto_shape": gamma, "pareto_scale": x_m},
    )
    return dataset, spec


def pack_unit_sphere(d, target_size, min_dist, rng, attempts_per_point=2000):
    """Greedy rejection packing of unit vectors at pairwise distance >= min_dist."""
    if d == 1:
        return np.array([[1.0], [-1.0]])[: max(2, min(target_size, 2))]
    points = []
    attempts_left = attempts_per_point * target_size
    while len(points) < target_size and attempts_left > 0:
        cand = _unit_sphere(rng, 1, d)[0]
        attempts_left -= 1
        if points:
            dists = np.linalg.norm(np.asarray(points) - cand, axis=1)
            if float(dists.min()) < min_dist:
                continue
        points.append(cand)
    if len(points) < 2:
        raise RuntimeError(
            f"packing construction failed: built {len(points)} of "
            f"{target_size} points within the retry budget"
        )
    return np.asarray(points)


def gen_packing_hard(d, n, epsilon, zeta, G_k, tail_index, seed, *,
                     domain_radius=1.0, attempts_per_point=2000):
    """Sparse two-mass hard instance (1-p) delta_0 + p delta_{a nu}.

    p = min{log((|V|-1)/(4 e zeta)) / (n eps), 1} over a 1/2-packing V of
    the unit ball with |V| = 2^min(d, 16); a = G_k p^(-1/k). When the formula
    is nonpositive, p is clamped to a machine floor and the instance is
    flagged vacuous.
    """
    k = float(tail_index)
    if k < 2:
        raise ValueError("tail index k must be >= 2")
    check_positive(epsilon, "epsilon")
    check_in_interval(zeta, 0.0, 0.25, "zeta")
    check_positive(G_k, "G_k")
    rng = np.random.default_rng(seed)

    target = 2 ** min(d, 16)
    packing = pack_unit_sphere(d, target, 0.5, rng, attempts_per_point)
    nu = packing[rng.integers(len(packing))]

    p_raw = math.log((len(packing) - 1) / (4.0 * math.e * zeta)) / (n * epsilon)
    vacuous = p_raw <= 0.0
    p = min(max(p_raw, P_FLOOR), 1.0)
    a_mag = G_k * p ** (-1.0 / k)

    active = rng.uniform(size=n) < p
    a = np.where(active[:, None], a_mag * nu[None, :], 0.0)
    dataset = Dataset(a, np.zeros(n))

    mu = G_k * p ** (1.0 - 1.0 / k) * nu
    moment = MomentSpec(
        k=k,
        G_k=float(G_k),
        G_2=float(G_k) * p ** (0.5 - 1.0 / k),
        G_1=float(G_k) * p ** (1.0 - 1.0 / k),
    )
    spec = InstanceSpec(
        kind="packing_hard",
        d=d,
        n=n,
        seed=seed,
        loss="linear",
        moment=moment,
        mu=mu,
        domain_radius=float(domain_radius),
        params={"tail_index": k, "G_k": float(G_k), "epsilon": float(epsilon),
                "zeta": float(zeta), "p": p, "p_raw": p_raw, "a": a_mag,
                "packing_size": len(packing), "nu": nu.tolist()},
        vacuous=vacuous,
    )
    return dataset, spec


def gen_two_point(n, zeta, G_2, sign, seed, *, d=1, c0=0.25, domain_radius=1.0):
    """Bounded two-point instance supported on {+-G_2 e_1}.

    P(z = G_2 e_1) = (1 + sign * rho) / 2 with rho = c0 min{sqrt(log(1/zeta)/n), 1},
    so the mean is mu = sign * rho * G_2 * e_1 and ||z|| = G_2 almost surely.
    """
    check_in_interval(zeta, 0.0, 0.25, "zeta")
    check_positive(G_2, "G_2")
    if sign not in (-1, 0, 1):
        raise ValueError("sign must be -1, 0, or +1")
    rng = np.random.default_rng(seed)

    rho = c0 * min(math.sqrt(math.log(1.0 / zeta) / n), 1.0)
    p_plus = (1.0 + sign * rho) / 2.0
    plus = rng.uniform(size=n) < p_plus
    e1 = np.zeros(d)
    e1[0] = 1.0
    a = np.where(plus[:, None], G_2 * e1[None, :], -G_2 * e1[None, :])
    dataset = Dataset(a, np.zeros(n))

    moment = MomentSpec(k=2.0, G_k=float(G_2), G_2=float(G_2), G_1=float(G_2))
    spec = InstanceSpec(
        kind="two_point",
        d=d,
        n=n,
        seed=seed,
        loss="linear",
        moment=moment,
        mu=sign * rho * G_2 * e1,
        domain_radius=float(domain_radius),
        params={"zeta": float(zeta), "G_2": float(G_2), "sign": int(sign),
                "c0": float(c0), "rho": rho},
    )
    return dataset, spec


GENERATORS = {
    "pareto_linear": gen_pareto_linear,
    "packing_hard": gen_packing_hard,
    "two_point": gen_two_point,
}


def eval_loss(model, w, sample):
    return model.value(w, sample)


def eval_subgradient(model, w, sample):
    return model.subgradient(w, sample)
