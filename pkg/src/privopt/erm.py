"""Private regularized-ERM solvers.

The two-stage structure shared by the main solvers:

1. localize: compute a certified coarse minimizer of the regularized
   empirical extension objective, privatize it with isotropic Laplace noise,
   and intersect the domain with a ball around the noisy point;
2. optimize over the localized set to a certified accuracy and privatize the
   result with a second output-perturbation step.

Stage subproblems can be solved three ways (`stage_solver`):

- "joint": the certified adaptive method on the jointly convex
  reformulation over (w, y_1..y_m); the general-purpose route.
- "direct": constant-step projected subgradient descent fed by biased
  extension-subgradient oracles; deterministic iteration counts.
- "scalar": exact extension values plus certified golden-section search;
  available only in dimension one, where it is fastest by far.
- "auto" picks "scalar" when d == 1 and "joint" otherwise.

All routes return certified alpha-minimizers of the same strongly convex
objective, so downstream sensitivity calibration is route-independent.

Stochastic behavior is controlled by the injected numpy Generator. The
underscore-prefixed keyword arguments (_zero_noise, _pin_localized) are
test-only hooks for isolating the deterministic core; they are not part of
the supported interface.
"""

import math
import time
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .dp import NoiseSpec, exponential_mechanism, sample_isotropic_laplace
from .extension import (
    extension_subgradient_approx,
    make_joint_oracle,
    make_scalar_extension_objective,
    pack_joint,
    unpack_joint,
)
from .geometry import (
    ConvexDomain,
    LocalizedDomain,
    Product,
    contains_many,
    interval_bounds,
    project_many,
)
from .losses import LOSS_KINDS, Dataset, LossModel, MomentSpec
from .subgrad import (
    STOP_CERTIFIED,
    SolveCertificate,
    adaptive_projsubgrad,
    biased_psg,
    minimize_convex_scalar,
)
from .validation import as_vector, check_positive

STAGE_SOLVERS = ("auto", "joint", "direct", "scalar")
EM_PGM_MAX_NET = 10_000_000
EM_PGM_MAX_DIM = 3
_NET_CHUNK = 4096


@dataclass
class ErmInstance:
    """One regularized ERM problem: dataset, domain, center, and parameters."""

    dataset: Dataset
    model: LossModel
    domain: ConvexDomain
    epsilon: float
    lam: float
    w0: np.ndarray
    C: float
    moment: Optional[MomentSpec] = None

    def __post_init__(self):
        check_positive(self.epsilon, "epsilon")
        check_positive(self.lam, "lam")
        check_positive(self.C, "C")
        self.w0 = as_vector(self.w0, dim=self.domain.dim, name="w0")
        if self.dataset.d != self.domain.dim:
            raise ValueError("dataset dimension does not match the domain")
        if not self.domain.contains(self.w0):
            raise ValueError("regularization center w0 must lie in the domain")

    @classmethod
    def create(cls, dataset, model, domain, epsilon, lam, w0, moment, C=None):
        """Build an instance; C defaults to G_k (m eps / d)^(1/k)."""
        if C is None:
            m = dataset.n
            C = moment.G_k * (m * epsilon / dataset.d) ** (1.0 / moment.k)
        return cls(dataset, model, domain, epsilon, lam, w0, C, moment)

    @property
    def m(self):
        return self.dataset.n

    @property
    def d(self):
        return self.dataset.d

    def stage1_accuracy(self):
        return self.C**2 / (2.0 * self.lam * self.m**2)

    def stage2_accuracy(self):
        return self.C**2 / (72.0 * self.lam * self.m**2)

    def stage2_projection_tol(self):
        return self.C / (6.0 * self.lam * self.m)


@dataclass
class LocalizeInfo:
    w_tilde: np.ndarray
    certificate: SolveCertificate
    noise_norm: float
    noise_scale: float
    radius: float


@dataclass
class ErmReport:
    """Trace of one private ERM solve."""

    output: np.ndarray
    localized_domain: Optional[ConvexDomain]
    radius: Optional[float]
    budget_split: tuple
    stage1_certificate: Optional[SolveCertificate]
    stage2_certificate: SolveCertificate
    noise_norms: tuple
    runtime_ms: float
    solver: str

    @property
    def certified(self):
        stage1_ok = (
            self.stage1_certificate is None or self.stage1_certificate.certified
        )
        return stage1_ok and self.stage2_certificate.certified

    def to_dict(self):
        return {
            "output": [float(v) for v in self.output],
            "radius": self.radius,
            "budget_split": [float(b) for b in self.budget_split],
            "stage1_iters": (
                None
                if self.stage1_certificate is None
                else self.stage1_certificate.iterations
            ),
            "stage2_iters": self.stage2_certificate.iterations,
            "noise_norms": [float(v) for v in self.noise_norms],
            "certified": {
                "stage1": (
                    self.stage1_certificate is None
                    or self.stage1_certificate.certified
                ),
                "stage2": self.stage2_certificate.certified,
            },
            "solver": self.solver,
            "runtime_ms": self.runtime_ms,
        }


def _resolve_stage_solver(inst, stage_solver):
    if stage_solver not in STAGE_SOLVERS:
        raise ValueError(f"stage_solver must be one of {STAGE_SOLVERS}")
    if stage_solver == "auto":
        return "scalar" if inst.d == 1 else "joint"
    if stage_solver == "scalar" and inst.d != 1:
        raise ValueError("the scalar stage solver requires d == 1")
    return stage_solver


def minimize_stage(inst, opt_domain, alpha, stage_solver="auto", max_iters=None):
    """Certified alpha-minimizer of the regularized extension objective.

    Minimizes mean_i f_C(w, z_i) + lam/2 ||w - w0||^2 over opt_domain (the
    extension's inner problem always ranges over the full base domain).
    Returns (w, SolveCertificate).
    """
    route = _resolve_stage_solver(inst, stage_solver)
    if route == "scalar":
        return _stage_scalar(inst, opt_domain, alpha)
    if route == "joint":
        return _stage_joint(inst, opt_domain, alpha, max_iters)
    return _stage_direct(inst, opt_domain, alpha, max_iters)


def _stage_scalar(inst, opt_domain, alpha):
    lo, hi = interval_bounds(opt_domain)
    objective = make_scalar_extension_objective(
        inst.model, inst.dataset, inst.C, inst.lam, inst.w0, inst.domain
    )
    w0_s = float(inst.w0[0])
    lipschitz = inst.C + inst.lam * max(abs(lo - w0_s), abs(hi - w0_s))
    x, gap, evals = minimize_convex_scalar(objective, lo, hi, alpha, lipschitz)
    cert = SolveCertificate(
        iterations=evals,
        cumulative_sq_grad=0.0,
        target_alpha=alpha,
        stop_reason=STOP_CERTIFIED,
        diameter=hi - lo,
        method="scalar",
    )
    return np.array([x]), cert


def _stage_joint(inst, opt_domain, alpha, max_iters):
    m, d = inst.m, inst.d
    joint_domain = Product([opt_domain] + [inst.domain] * m)
    grad_fn, _ = make_joint_oracle(
        inst.model, inst.dataset, inst.C, inst.lam, inst.w0
    )
    w_start = opt_domain.anchor()
    ys_start = np.tile(inst.domain.project(w_start), (m, 1))
    x0 = pack_joint(w_start, ys_start)
    x, cert = adaptive_projsubgrad(
        joint_domain, grad_fn, alpha, x0=x0, cap=max_iters
    )
    w, _ = unpack_joint(x, m, d)
    return w, cert


def _stage_direct(inst, opt_domain, alpha, max_iters):
    if inst.model.kind not in LOSS_KINDS:
        raise ValueError(f"unsupported loss kind {inst.model.kind!r}")
    bias = alpha / 4.0
    norm_bound = inst.C + inst.lam * inst.domain.diameter_bound

    def grad(w):
        g = np.zeros(inst.d)
        for i in range(inst.m):
            g += extension_subgradient_approx(
                inst.model, inst.dataset.sample(i), w, inst.domain, inst.C, bias
            )
        return g / inst.m + inst.lam * (w - inst.w0)

    return biased_psg(
        opt_domain,
        grad,
        alpha,
        norm_bound=norm_bound,
        bias=bias,
        x0=opt_domain.anchor(),
    )


def outputpert_localize(inst, eps_stage, zeta, rng, *, stage_solver="auto",
                        max_iters=None, return_info=False, _zero_noise=False):
    """Output-perturbation localization.

    Computes w_tilde with objective gap at most C^2 / (2 lam n^2), adds
    isotropic Laplace noise at scale 6C / (lam n eps_stage), projects onto
    the domain, and returns the domain intersected with the ball of radius
    100 zeta C d / (lam n eps_stage) around the noisy point.
    """
    if zeta < 1.0:
        raise ValueError("zeta must be >= 1")
    check_positive(eps_stage, "eps_stage")
    n = inst.m
    w_tilde, cert = minimize_stage(
        inst, inst.domain, inst.stage1_accuracy(), stage_solver, max_iters
    )
    scale = 6.0 * inst.C / (inst.lam * n * eps_stage)
    if _zero_noise:
        noise = np.zeros(inst.d)
    else:
        noise = sample_isotropic_laplace(NoiseSpec(inst.d, scale), rng)
    w_loc = inst.domain.project(w_tilde + noise)
    radius = 100.0 * zeta * inst.C * inst.d / (inst.lam * n * eps_stage)
    locdom = LocalizedDomain(inst.domain, w_loc, radius)
    if not return_info:
        return locdom
    info = LocalizeInfo(
        w_tilde=w_tilde,
        certificate=cert,
        noise_norm=float(np.linalg.norm(noise)),
        noise_scale=scale,
        radius=radius,
    )
    return locdom, info


def _double_outputpert_core(inst, rng, solver_name, stage_solver, max_iters,
                            _zero_noise, _pin_localized):
    start = time.perf_counter()
    m = inst.m
    alpha = inst.stage2_accuracy()
    xi = inst.stage2_projection_tol()
    eps_half = inst.epsilon / 2.0

    if _pin_localized is not None:
        locdom = _pin_localized
        info1 = None
    else:
        locdom, info1 = outputpert_localize(
            inst,
            eps_half,
            3.0,
            rng,
            stage_solver=stage_solver,
            max_iters=max_iters,
            return_info=True,
            _zero_noise=_zero_noise,
        )

    w_alpha, cert2 = minimize_stage(inst, locdom, alpha, stage_solver, max_iters)

    scale2 = 12.0 * inst.C / (inst.epsilon * inst.lam * m)
    if _zero_noise:
        noise2 = np.zeros(inst.d)
    else:
        noise2 = sample_isotropic_laplace(NoiseSpec(inst.d, scale2), rng)
    output = locdom.project_inexact(w_alpha + noise2, xi)

    runtime_ms = (time.perf_counter() - start) * 1e3
    return ErmReport(
        output=output,
        localized_domain=locdom,
        radius=getattr(locdom, "radius", None),
        budget_split=(eps_half, eps_half),
        stage1_certificate=None if info1 is None else info1.certificate,
        stage2_certificate=cert2,
        noise_norms=(
            0.0 if info1 is None else info1.noise_norm,
            float(np.linalg.norm(noise2)),
        ),
        runtime_ms=runtime_ms,
        solver=solver_name,
    )


def double_outputpert(inst, rng, *, stage_solver="auto", max_iters=None,
                      _zero_noise=False, _pin_localized=None):
    """Double output perturbation: localize at budget eps/2 with zeta = 3,
    optimize over the localized set to accuracy C^2/(72 lam m^2), perturb
    with isotropic Laplace noise at scale 12C/(eps lam m), and project
    xi-inexactly with xi = C/(6 lam m). Budget split (eps/2, eps/2)."""
    return _double_outputpert_core(
        inst, rng, "double_outputpert", stage_solver, max_iters,
        _zero_noise, _pin_localized,
    )


def direct_extension_erm(inst, rng, *, max_iters=None, _zero_noise=False,
                         _pin_localized=None):
    """Same two-stage structure as double_outputpert, but both stages run
    constant-step projected subgradient descent directly on the regularized
    extension objective with biased subgradient oracles (bias alpha/4, norm
    bound C + lam D). Iteration counts are deterministic."""
    if inst.model.kind not in LOSS_KINDS:
        raise ValueError(
            f"direct_extension_erm supports loss kinds {LOSS_KINDS}, "
            f"got {inst.model.kind!r}"
        )
    return _double_outputpert_core(
        inst, rng, "direct_extension", "direct", max_iters,
        _zero_noise, _pin_localized,
    )


def clipped_mean_gradient(model, dataset, w, C):
    """(1/n) sum_i clip_C(grad f(w, z_i))."""
    grads = model.gradients_vec(w, dataset.a, dataset.b)
    norms = np.linalg.norm(grads, axis=1)
    scale = np.ones_like(norms)
    big = norms > C
    scale[big] = C / norms[big]
    return (grads * scale[:, None]).mean(axis=0)


def _pgm_scores(inst, net, gamma, C):
    """Clipped projected-gradient-mapping norms over the candidate net."""
    a_norms = np.linalg.norm(inst.dataset.a, axis=1)
    scores = np.empty(len(net))
    for start in range(0, len(net), _NET_CHUNK):
        chunk = net[start:start + _NET_CHUNK]
        margins = chunk @ inst.dataset.a.T + inst.dataset.b[None, :]
        slopes = inst.model.scalar_slopes(margins)
        norms = np.abs(slopes) * a_norms[None, :]
        factor = np.where(norms > C, C / np.where(norms == 0.0, 1.0, norms), 1.0)
        g_clip = (slopes * factor) @ inst.dataset.a / inst.m
        step = chunk - gamma * (g_clip + inst.lam * (chunk - inst.w0[None, :]))
        projected = project_many(inst.domain, step)
        scores[start:start + len(chunk)] = (
            np.linalg.norm(chunk - projected, axis=1) / gamma
        )
    return scores


def build_net(domain, spacing):
    """Axis-aligned grid of the domain's bounding box, filtered to members."""
    lo, hi = domain.bounding_box()
    axes = []
    total = 1
    for j in range(domain.dim):
        count = int(math.floor((hi[j] - lo[j]) / spacing)) + 1
        total *= count
        if total > EM_PGM_MAX_NET:
            raise ValueError(
                f"candidate net would exceed {EM_PGM_MAX_NET} points; refuse"
            )
        axes.append(lo[j] + spacing * np.arange(count))
    mesh = np.meshgrid(*axes, indexing="ij")
    pts = np.stack([g.ravel() for g in mesh], axis=1)
    keep = contains_many(domain, pts)
    pts = pts[keep]
    if len(pts) == 0:
        pts = domain.anchor()[None, :]
    return pts


def em_pgm(inst, rng, gamma=None, net_radius=None, *, smoothness=None):
    """Exponential mechanism over a net with a clipped projected-gradient score.

    Small-dimension reference baseline (d <= 3). Scores are the norms of the
    clipped projected gradient mapping of the regularized objective; the
    winner is sampled with sensitivity 2C/n at the full budget epsilon.
    Nonsmooth losses require a caller-supplied smoothness surrogate.
    """
    if inst.d > EM_PGM_MAX_DIM:
        raise ValueError(f"em_pgm is restricted to d <= {EM_PGM_MAX_DIM}")
    if (gamma is None or net_radius is None) and smoothness is None:
        raise ValueError(
            "em_pgm needs a smoothness surrogate to derive default gamma and "
            "net radius"
        )
    n = inst.m
    if gamma is None:
        gamma = 1.0 / (inst.lam + smoothness)
    if net_radius is None:
        net_radius = inst.C * inst.d / (inst.epsilon * n * (inst.lam + smoothness))
    check_positive(gamma, "gamma")
    check_positive(net_radius, "net_radius")

    spacing = net_radius / math.sqrt(inst.d)
    net = build_net(inst.domain, spacing)
    scores = _pgm_scores(inst, net, gamma, inst.C)
    idx = exponential_mechanism(scores, 2.0 * inst.C / n, inst.epsilon, rng)
    return net[idx]
