"""Population-localization wrapper converting a private regularized-ERM
solver into a full SCO algorithm.

T = ceil(log2 n) phases run on disjoint batches of size n_t = floor(n / 2^t)
with regularization lambda_t = 32^(t-1) lambda_1. Each phase makes J
independent ERM calls centered at the current iterate on disjoint blocks of
size m_t = floor(n_t / J) and combines them by geometric aggregation.
Trailing phases whose block size would drop below one sample are skipped
(and logged); disjointness gives the overall privacy budget by parallel
composition.
"""

import hashlib
import math
from dataclasses import dataclass, field
from typing import Callable, List, Optional

import numpy as np

from .erm import ErmInstance, direct_extension_erm, double_outputpert, em_pgm
from .losses import LossModel, MomentSpec
from .validation import check_in_interval, check_positive

SOLVER_NAMES = ("double_outputpert", "direct_extension", "em_pgm")


def default_lambda1(moment, diameter, n, d, epsilon, delta):
    """Base regularization equating the first-phase localization radius with
    the domain diameter: (G_k/D)(d ln(1/delta)/(n eps))^(1-1/k)
    + (G_2/D) sqrt(ln(1/delta)/n)."""
    log_term = math.log(1.0 / delta)
    k = moment.k
    return (moment.G_k / diameter) * (d * log_term / (n * epsilon)) ** (1.0 - 1.0 / k) \
        + (moment.G_2 / diameter) * math.sqrt(log_term / n)


@dataclass
class ScoConfig:
    """Schedule and solver selection for pop_localize."""

    n: int
    d: int
    epsilon: float
    delta: float
    moment: MomentSpec
    lambda1: Optional[float] = None
    J_override: Optional[int] = None
    solver: str = "double_outputpert"
    stage_solver: str = "auto"
    max_iters: Optional[int] = None
    em_smoothness: Optional[float] = None

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("n must be >= 1")
        check_positive(self.epsilon, "epsilon")
        check_in_interval(self.delta, 0.0, 0.5, "delta", closed_hi=False)
        if self.solver not in SOLVER_NAMES:
            raise ValueError(f"solver must be one of {SOLVER_NAMES}")

    @property
    def phases(self):
        return max(1, math.ceil(math.log2(self.n)))

    @property
    def repetitions(self):
        if self.J_override is not None:
            if self.J_override < 1:
                raise ValueError("J_override must be >= 1")
            return self.J_override
        return math.ceil(8.0 * math.log(4.0 * self.phases / self.delta))

    def resolve_lambda1(self, diameter):
        if self.lambda1 is not None:
            return check_positive(self.lambda1, "lambda1")
        return default_lambda1(
            self.moment, diameter, self.n, self.d, self.epsilon, self.delta
        )

    def schedule(self, diameter):
        """List of (t, n_t, m_t, lambda_t); truncated where m_t < 1."""
        lam1 = self.resolve_lambda1(diameter)
        j_reps = self.repetitions
        rows = []
        for t in range(1, self.phases + 1):
            n_t = self.n // 2**t
            m_t = n_t // j_reps
            rows.append((t, n_t, m_t, 32.0 ** (t - 1) * lam1))
        return rows


def aggregate_geometric(points):
    """Input point minimizing the floor(J/2)-th smallest distance to the
    other points: the smallest radius whose ball around the point covers a
    strict majority. Ties break toward the lowest index."""
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[0] == 0:
        raise ValueError("points must be a nonempty (J, d) array")
    j_reps = pts.shape[0]
    if j_reps == 1:
        return pts[0].copy()
    dists = np.linalg.norm(pts[:, None, :] - pts[None, :, :], axis=2)
    order = np.sort(
        dists[~np.eye(j_reps, dtype=bool)].reshape(j_reps, j_reps - 1), axis=1
    )
    radii = order[:, j_reps // 2 - 1]
    return pts[int(np.argmin(radii))].copy()


@dataclass
class PhaseLogRow:
    phase: int
    repetition: int
    m_t: int
    lambda_t: float
    C: float
    output_hash: str
    certified: bool
    skipped: str = ""

    def to_csv_row(self):
        return [
            self.phase,
            self.repetition,
            self.m_t,
            f"{self.lambda_t:.12g}",
            f"{self.C:.12g}",
            self.output_hash,
            int(self.certified),
            self.skipped,
        ]


RUN_LOG_COLUMNS = [
    "phase", "repetition", "m_t", "lambda_t", "C", "output_hash",
    "certified", "skipped",
]


def _hash_point(w):
    return hashlib.sha1(np.ascontiguousarray(w, dtype=float).tobytes()).hexdigest()[:12]


def make_erm_solver(cfg) -> Callable:
    """Adapter: (instance, rng) -> (point, certified flag)."""
    if cfg.solver == "double_outputpert":
        def run(inst, rng):
            rep = double_outputpert(
                inst, rng, stage_solver=cfg.stage_solver, max_iters=cfg.max_iters
            )
            return rep.output, rep.certified
    elif cfg.solver == "direct_extension":
        def run(inst, rng):
            rep = direct_extension_erm(inst, rng, max_iters=cfg.max_iters)
            return rep.output, rep.certified
    else:
        def run(inst, rng):
            if cfg.em_smoothness is None:
                raise ValueError("em_pgm solver requires em_smoothness")
            w = em_pgm(inst, rng, smoothness=cfg.em_smoothness)
            return w, True
    return run


def pop_localize(dataset, cfg, model, domain, rng, *, w_init=None,
                 erm_solver=None) -> tuple:
    """Run the phase schedule and return (final point, run log rows)."""
    if dataset.n != cfg.n:
        raise ValueError("dataset size does not match the configuration")
    if dataset.d != cfg.d or domain.dim != cfg.d:
        raise ValueError("dimension mismatch between dataset, config, and domain")
    j_reps = cfg.repetitions
    t_phases = cfg.phases
    minimal_n = 2 * j_reps * t_phases
    if cfg.n < minimal_n:
        raise ValueError(
            f"insufficient data: need n >= 2*J*T = {minimal_n} "
            f"(J={j_reps}, T={t_phases}), got {cfg.n}"
        )
    if erm_solver is None:
        erm_solver = make_erm_solver(cfg)

    w_bar = domain.anchor() if w_init is None else np.asarray(w_init, dtype=float)
    log: List[PhaseLogRow] = []
    offset = 0
    for t, n_t, m_t, lam_t in cfg.schedule(domain.diameter_bound):
        if m_t < 1:
            log.append(PhaseLogRow(t, 0, m_t, lam_t, 0.0, "", False,
                                   skipped="m_t<1"))
            break
        c_t = cfg.moment.G_k * (m_t * cfg.epsilon / cfg.d) ** (1.0 / cfg.moment.k)
        points = []
        for j in range(1, j_reps + 1):
            batch = dataset.subset(offset + (j - 1) * m_t, offset + j * m_t)
            inst = ErmInstance(
                dataset=batch,
                model=model,
                domain=domain,
                epsilon=cfg.epsilon,
                lam=lam_t,
                w0=w_bar,
                C=c_t,
                moment=cfg.moment,
            )
            w_hat, certified = erm_solver(inst, rng)
            points.append(w_hat)
            log.append(
                PhaseLogRow(t, j, m_t, lam_t, c_t, _hash_point(w_hat), certified)
            )
        offset += n_t  # the whole phase batch is consumed, leftovers included
        w_bar = aggregate_geometric(points)
    return w_bar, log


def write_run_log(rows, path):
    import csv

    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(RUN_LOG_COLUMNS)
        for row in rows:
            writer.writerow(row.to_csv_row())
