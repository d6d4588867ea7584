"""Privacy mechanisms: isotropic high-dimensional Laplace noise and the
finite-candidate exponential mechanism, with explicit budget bookkeeping.

Randomness is always drawn from an injected numpy Generator so experiments
are reproducible; production deployments would substitute a CSPRNG.
"""

from dataclasses import dataclass

import numpy as np

from .validation import check_positive


@dataclass(frozen=True)
class PrivacyBudget:
    """A pure-DP budget epsilon > 0 with exact splitting helpers."""

    epsilon: float

    def __post_init__(self):
        check_positive(self.epsilon, "epsilon")

    def halves(self):
        return (self.epsilon / 2.0, self.epsilon / 2.0)

    def split(self, *fractions):
        if abs(sum(fractions) - 1.0) > 1e-12:
            raise ValueError("budget fractions must sum to 1")
        return tuple(self.epsilon * f for f in fractions)


@dataclass(frozen=True)
class NoiseSpec:
    """Isotropic Laplace noise with density proportional to exp(-||b|| / scale).

    The radial law of ||b|| is Gamma(shape=dimension, scale=scale).
    """

    dimension: int
    scale: float

    def __post_init__(self):
        if self.dimension < 1:
            raise ValueError("dimension must be >= 1")
        check_positive(self.scale, "scale")


def sample_isotropic_laplace(spec, rng):
    """Draw b = R * u with u uniform on the unit sphere, R ~ Gamma(d, scale)."""
    d = spec.dimension
    direction = rng.standard_normal(d)
    norm = float(np.linalg.norm(direction))
    while norm == 0.0:
        direction = rng.standard_normal(d)
        norm = float(np.linalg.norm(direction))
    radius = rng.gamma(shape=d, scale=spec.scale)
    return (radius / norm) * direction


def exponential_mechanism(scores, sensitivity, epsilon, rng):
    """Sample index i with probability proportional to exp(-eps * s_i / (2 Delta)).

    Low scores are favored. Stabilized by shifting scores so the minimum maps
    to the largest unnormalized weight.
    """
    scores = np.asarray(scores, dtype=float)
    if scores.ndim != 1 or scores.size == 0:
        raise ValueError("scores must be a nonempty 1-D sequence")
    if not np.all(np.isfinite(scores)):
        raise ValueError("scores must be finite")
    sensitivity = check_positive(sensitivity, "sensitivity")
    epsilon = check_positive(epsilon, "epsilon")
    shifted = scores - scores.min()
    weights = np.exp(-epsilon * shifted / (2.0 * sensitivity))
    probs = weights / weights.sum()
    return int(rng.choice(scores.size, p=probs))


def exponential_mechanism_probabilities(scores, sensitivity, epsilon):
    """The softmax distribution the mechanism samples from (for diagnostics)."""
    scores = np.asarray(scores, dtype=float)
    shifted = scores - scores.min()
    weights = np.exp(-epsilon * shifted / (2.0 * sensitivity))
    return weights / weights.sum()
