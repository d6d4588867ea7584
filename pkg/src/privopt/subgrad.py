"""Certified first-order solvers.

Two projected subgradient methods share the inexact-projection interface of
the geometry module:

- an adaptive method that needs no Lipschitz bound: it sets the step from the
  running sum of squared gradient norms and stops at a certificate computed
  from observed quantities only;
- a constant-step method for oracles with a declared norm bound and an
  additive bias, run for a fixed iteration budget.

A golden-section scalar minimizer with a Lipschitz-based value certificate
rounds out the toolbox for one-dimensional subproblems.
"""

import csv
import math
from dataclasses import dataclass, field
from typing import Callable, List, Optional

import numpy as np

from .validation import as_vector, check_positive

STOP_ZERO_GRADIENT = "zero_gradient"
STOP_CERTIFIED = "certified"
STOP_ITERATION_CAP = "iteration_cap"


@dataclass
class SolveCertificate:
    """Outcome of one solver run.

    For the adaptive method, stop_reason == "certified" means the stopping
    test 3 * D * sqrt(S_t) <= alpha * t held at the final iteration, which
    implies a value gap of at most target_alpha.
    """

    iterations: int
    cumulative_sq_grad: float
    target_alpha: float
    stop_reason: str
    diameter: float
    method: str = "adaptive"

    @property
    def certified(self):
        return self.stop_reason in (STOP_CERTIFIED, STOP_ZERO_GRADIENT)

    def stopping_test_holds(self, slack=1e-9):
        lhs = 3.0 * self.diameter * math.sqrt(max(self.cumulative_sq_grad, 0.0))
        return lhs <= self.target_alpha * self.iterations * (1.0 + slack)


@dataclass
class SolverTrace:
    """Optional per-iteration log: (t, ||g_t||, S_t, eta_t, xi_t, value)."""

    rows: List[tuple] = field(default_factory=list)

    def append(self, t, gnorm, s_t, eta_t, xi_t, value):
        self.rows.append((t, gnorm, s_t, eta_t, xi_t, value))

    def best_values(self):
        vals = [r[5] for r in self.rows if r[5] is not None]
        return list(np.minimum.accumulate(vals)) if vals else []

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["t", "grad_norm", "S_t", "eta_t", "xi_t", "objective"])
            for row in self.rows:
                writer.writerow(["" if v is None else v for v in row])


@dataclass(frozen=True)
class FirstOrderOracle:
    """Subgradient oracle with optional declared bias and norm bound."""

    grad: Callable[[np.ndarray], np.ndarray]
    bias: float = 0.0
    norm_bound: Optional[float] = None
    value: Optional[Callable[[np.ndarray], float]] = None

    def __call__(self, x):
        g = np.asarray(self.grad(x), dtype=float)
        if self.norm_bound is not None:
            norm = float(np.linalg.norm(g))
            if norm > self.norm_bound * (1.0 + 1e-9):
                raise ValueError(
                    f"oracle returned gradient of norm {norm:.6g}, above the "
                    f"declared bound {self.norm_bound:.6g}"
                )
        return g


def _as_oracle(oracle):
    return oracle if isinstance(oracle, FirstOrderOracle) else FirstOrderOracle(oracle)


def adaptive_projsubgrad(domain, oracle, alpha, diameter=None, x0=None, cap=None,
                         trace=None):
    """Adaptive inexact projected subgradient method.

    Runs x_{t+1} = P^{xi_t}(x_t - eta_t g_t) with eta_t = D / sqrt(S_t),
    S_t = sum_s ||g_s||^2 and xi_t = min{D, alpha eta_t / (6 D)}, returning
    x_t immediately on a zero subgradient and otherwise the running average
    once 3 D sqrt(S_t) <= alpha t. The output is then an alpha-minimizer.

    `cap` bounds the iteration count; by default it is ten times the
    a-posteriori bound ceil((3 D L_obs / alpha)^2) with L_obs the largest
    observed gradient norm, a safety net that the stopping test provably
    beats. Hitting the cap returns the current average flagged
    "iteration_cap".
    """
    alpha = check_positive(alpha, "alpha")
    oracle = _as_oracle(oracle)
    d_bound = check_positive(
        diameter if diameter is not None else domain.diameter_bound, "diameter"
    )
    x = domain.anchor() if x0 is None else as_vector(x0, dim=domain.dim, name="x0")
    x_sum = np.zeros_like(x)
    s_t = 0.0
    g_max = 0.0
    t = 0
    while True:
        t += 1
        g = oracle(x)
        gnorm = float(np.linalg.norm(g))
        if gnorm == 0.0:
            return x, SolveCertificate(t, s_t, alpha, STOP_ZERO_GRADIENT, d_bound)
        s_t += gnorm * gnorm
        g_max = max(g_max, gnorm)
        x_sum += x
        eta = d_bound / math.sqrt(s_t)
        xi = min(d_bound, alpha * eta / (6.0 * d_bound))
        if trace is not None:
            value = oracle.value(x) if oracle.value is not None else None
            trace.append(t, gnorm, s_t, eta, xi, value)
        if 3.0 * d_bound * math.sqrt(s_t) <= alpha * t:
            return x_sum / t, SolveCertificate(t, s_t, alpha, STOP_CERTIFIED, d_bound)
        hard_cap = cap
        if hard_cap is None:
            hard_cap = 10 * math.ceil((3.0 * d_bound * g_max / alpha) ** 2)
        if t >= hard_cap:
            return x_sum / t, SolveCertificate(
                t, s_t, alpha, STOP_ITERATION_CAP, d_bound
            )
        x = domain.project_inexact(x - eta * g, xi)


def biased_psg_schedule(diameter, norm_bound, alpha):
    """(T, eta, xi) for the constant-step biased method."""
    t_steps = int(math.ceil((4.0 * diameter * norm_bound / alpha) ** 2))
    eta = diameter / (norm_bound * math.sqrt(t_steps))
    xi = min(diameter, alpha * eta / (6.0 * diameter))
    return t_steps, eta, xi


def biased_psg(domain, oracle, alpha, norm_bound, bias=0.0, diameter=None, x0=None,
               trace=None):
    """Constant-step projected subgradient method with a biased oracle.

    Requires bias <= alpha / 4 and a declared gradient norm bound L. Runs
    exactly T = ceil((4 D L / alpha)^2) steps with eta = D / (L sqrt(T)) and
    per-step projection inexactness xi = min{D, alpha eta / (6 D)}; the
    uniform iterate average then has value gap at most alpha.
    """
    alpha = check_positive(alpha, "alpha")
    norm_bound = check_positive(norm_bound, "norm_bound")
    if bias > alpha / 4.0:
        raise ValueError(
            f"oracle bias {bias:.6g} exceeds alpha/4 = {alpha / 4.0:.6g}"
        )
    oracle = _as_oracle(oracle)
    if oracle.norm_bound is None:
        oracle = FirstOrderOracle(oracle.grad, oracle.bias, norm_bound, oracle.value)
    d_bound = check_positive(
        diameter if diameter is not None else domain.diameter_bound, "diameter"
    )
    t_steps, eta, xi = biased_psg_schedule(d_bound, norm_bound, alpha)
    x = domain.anchor() if x0 is None else as_vector(x0, dim=domain.dim, name="x0")
    x_sum = np.zeros_like(x)
    s_t = 0.0
    for t in range(1, t_steps + 1):
        g = oracle(x)
        s_t += float(np.linalg.norm(g)) ** 2
        x_sum += x
        if trace is not None:
            value = oracle.value(x) if oracle.value is not None else None
            trace.append(t, float(np.linalg.norm(g)), s_t, eta, xi, value)
        x = domain.project_inexact(x - eta * g, xi)
    return x_sum / t_steps, SolveCertificate(
        t_steps, s_t, alpha, STOP_CERTIFIED, d_bound, method="biased"
    )


def minimize_convex_scalar(fn, lo, hi, alpha, lipschitz):
    """Golden-section minimization of a convex function on [lo, hi].

    Returns (x_best, gap_bound, n_evals) where gap_bound <= alpha is a
    certified bound on fn(x_best) - min fn, derived from the final bracket
    width and the supplied Lipschitz constant.
    """
    alpha = check_positive(alpha, "alpha")
    if hi < lo:
        raise ValueError("empty interval")
    lipschitz = max(float(lipschitz), 0.0)
    if lipschitz * (hi - lo) <= alpha or hi == lo:
        x = 0.5 * (lo + hi)
        return x, lipschitz * (hi - lo), 0

    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    target = alpha / lipschitz
    a, b = lo, hi
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc, fd = fn(c), fn(d)
    evals = 2
    best_x, best_f = (c, fc) if fc <= fd else (d, fd)
    while (b - a) > target:
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = fn(c)
            if fc < best_f:
                best_x, best_f = c, fc
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = fn(d)
            if fd < best_f:
                best_x, best_f = d, fd
        evals += 1
    return best_x, lipschitz * (b - a), evals
