"""Experiment harness: instance construction, solver sweeps over
(n, d, epsilon, delta) grids, closed-form excess-risk evaluation, sensitivity
probes, and CSV emission.

Configuration is a flat key-path text file (``key = value`` per line, ``#``
comments); CLI flags override file keys which override defaults.
"""

import csv
import math
import time
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from .erm import ErmInstance, minimize_stage
from .geometry import Ball, LocalizedDomain
from .losses import (
    Dataset,
    LossModel,
    gen_packing_hard,
    gen_pareto_linear,
    gen_two_point,
)
from .sco import ScoConfig, pop_localize
from .validation import check_positive

EXCESS_RISK_FLOOR = -1e-9

CSV_COLUMNS = [
    "instance", "n", "d", "epsilon", "delta", "seed", "solver",
    "excess_risk", "theory_rate", "runtime_ms", "certified",
]


def theory_rate(moment, diameter, n, d, epsilon, delta):
    """G_k D (d ln(1/delta) / (n eps))^(1-1/k) + G_2 D sqrt(ln(1/delta) / n)."""
    log_term = math.log(1.0 / delta)
    k = moment.k
    return moment.G_k * diameter * (d * log_term / (n * epsilon)) ** (1.0 - 1.0 / k) \
        + moment.G_2 * diameter * math.sqrt(log_term / n)


def floor_excess_risk(value):
    """Clamp tiny negative numerical artifacts; risk is nonnegative."""
    if -1e-9 <= value < 0.0:
        return 0.0
    return value


def evaluate_excess_risk(spec, w):
    """F(w) - F* for an instance with a known mean gradient.

    Linear losses over the centered ball of radius R give
    F(w) - F* = <mu, w> + R ||mu||.
    """
    if spec.mu is None:
        raise ValueError("instance has no closed-form population oracle")
    w = np.asarray(w, dtype=float)
    mu = np.asarray(spec.mu, dtype=float)
    excess = float(np.dot(mu, w)) + spec.domain_radius * float(np.linalg.norm(mu))
    return floor_excess_risk(excess)


def population_risk_mc(spec, w, draws, seed):
    """Monte-Carlo cross-check of F(w) - F*: returns (estimate, stderr)."""
    dataset, _ = build_instance(
        spec.kind, draws, spec.d, seed, spec.params, spec.domain_radius
    )
    w = np.asarray(w, dtype=float)
    vals = dataset.a @ w + dataset.b
    f_star = spec.population_optimum()
    return float(vals.mean()) - f_star, float(vals.std(ddof=1) / math.sqrt(draws))


def mean_from_sco(w, m):
    """Mean estimator -m w / ||w|| recovered from an SCO output (m e_1 at w=0)."""
    check_positive(m, "m")
    w = np.asarray(w, dtype=float)
    norm = float(np.linalg.norm(w))
    if norm == 0.0:
        e1 = np.zeros(w.shape[0])
        e1[0] = 1.0
        return m * e1
    return -m * w / norm


def build_instance(kind, n, d, seed, params, domain_radius):
    """Dispatch to the generator named by `kind` with its parameters."""
    if kind == "pareto_linear":
        return gen_pareto_linear(
            d, n, params.get("tail_index", 2.0), params.get("G_k", 1.0), seed,
            bias=params.get("bias", 0.5), domain_radius=domain_radius,
        )
    if kind == "packing_hard":
        return gen_packing_hard(
            d, n, params.get("epsilon", 1.0), params.get("zeta", 0.25),
            params.get("G_k", 1.0), params.get("tail_index", 2.0), seed,
            domain_radius=domain_radius,
        )
    if kind == "two_point":
        return gen_two_point(
            n, params.get("zeta", 0.25), params.get("G_2", 1.0),
            int(params.get("sign", 1)), seed, d=d,
            c0=params.get("c0", 0.25), domain_radius=domain_radius,
        )
    raise ValueError(f"unknown instance kind {kind!r}")


@dataclass
class ResultRow:
    instance: str
    n: int
    d: int
    epsilon: float
    delta: float
    seed: int
    solver: str
    excess_risk: float
    theory_rate: float
    runtime_ms: float
    certified: bool

    def to_csv_row(self):
        return [
            self.instance, self.n, self.d,
            f"{self.epsilon:.12g}", f"{self.delta:.12g}", self.seed, self.solver,
            f"{self.excess_risk:.12g}", f"{self.theory_rate:.12g}",
            f"{self.runtime_ms:.3f}", int(self.certified),
        ]


_DEFAULTS = {
    "instance.kind": "pareto_linear",
    "instance.tail_index": 2.0,
    "instance.G_k": 1.0,
    "instance.G_2": 1.0,
    "instance.bias": 0.5,
    "instance.zeta": 0.25,
    "instance.sign": 1,
    "instance.c0": 0.25,
    "grid.n": [1024],
    "grid.d": [1],
    "grid.epsilon": [1.0],
    "grid.delta": [0.1],
    "seeds": 3,
    "seed_base": 0,
    "solver.name": "double_outputpert",
    "solver.stage_solver": "auto",
    "solver.max_iters": None,
    "solver.lambda1": None,
    "solver.lambda1_scale": 1.0,
    "solver.J_override": None,
    "solver.em_smoothness": None,
    "domain.radius": 1.0,
    "output": None,
}


def _coerce(value):
    text = value.strip()
    if text == "" or text.lower() == "none":
        return None
    if "," in text:
        return [_coerce(part) for part in text.split(",")]
    try:
        as_int = int(text)
        return as_int
    except ValueError:
        pass
    try:
        return float(text)
    except ValueError:
        pass
    if text.lower() in ("true", "false"):
        return text.lower() == "true"
    return text


def parse_config_text(text):
    """Parse ``key = value`` lines into a flat dict."""
    out = {}
    for idx, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"config line {idx}: expected 'key = value'")
        key, value = line.split("=", 1)
        out[key.strip()] = _coerce(value)
    return out


@dataclass
class ExperimentConfig:
    """Resolved experiment settings (see _DEFAULTS for the key map)."""

    options: dict = field(default_factory=dict)

    def __post_init__(self):
        merged = dict(_DEFAULTS)
        unknown = set(self.options) - set(_DEFAULTS)
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        merged.update(self.options)
        self.options = merged

    @classmethod
    def from_file(cls, path, overrides=None):
        with open(path) as fh:
            parsed = parse_config_text(fh.read())
        parsed.update(overrides or {})
        return cls(parsed)

    def __getitem__(self, key):
        return self.options[key]

    def grid_cells(self):
        def listify(v):
            return v if isinstance(v, list) else [v]

        for n in listify(self["grid.n"]):
            for d in listify(self["grid.d"]):
                for eps in listify(self["grid.epsilon"]):
                    for delta in listify(self["grid.delta"]):
                        yield int(n), int(d), float(eps), float(delta)

    def instance_params(self):
        prefix = "instance."
        return {
            key[len(prefix):]: value
            for key, value in self.options.items()
            if key.startswith(prefix) and key != "instance.kind"
        }


def _cell_seed_sequence(seed_base, n, d, epsilon, delta, seed):
    return np.random.SeedSequence(
        [int(seed_base), int(n), int(d), int(epsilon * 10**6) % (2**31),
         int(delta * 10**9) % (2**31), int(seed)]
    )


def run_experiment(cfg, log=None):
    """Execute all grid cells x seeds; returns the result rows.

    Rows are written incrementally when `output` is configured. Cells that
    fail (or fall below the localization wrapper's minimal-n precondition)
    produce rows flagged certified=False with NaN risk; the sweep never
    aborts. Output is deterministic per (cell, seed).
    """
    rows: List[ResultRow] = []
    log = log if log is not None else []
    writer = None
    handle = None
    out_path = cfg["output"]
    if out_path:
        handle = open(out_path, "w", newline="")
        writer = csv.writer(handle)
        writer.writerow(CSV_COLUMNS)

    kind = cfg["instance.kind"]
    params = cfg.instance_params()
    radius = float(cfg["domain.radius"])
    try:
        for n, d, epsilon, delta in cfg.grid_cells():
            for seed in range(int(cfg["seeds"])):
                seq = _cell_seed_sequence(
                    cfg["seed_base"], n, d, epsilon, delta, seed
                )
                inst_seed, solver_seed = seq.generate_state(2).tolist()
                dataset, spec = build_instance(
                    kind, n, d, inst_seed, params, radius
                )
                instance_id = f"{kind}-s{seed}"
                rate = theory_rate(spec.moment, 2 * radius, n, d, epsilon, delta)
                start = time.perf_counter()
                try:
                    sco_cfg = ScoConfig(
                        n=n, d=d, epsilon=epsilon, delta=delta,
                        moment=spec.moment,
                        lambda1=cfg["solver.lambda1"],
                        J_override=cfg["solver.J_override"],
                        solver=cfg["solver.name"],
                        stage_solver=cfg["solver.stage_solver"],
                        max_iters=cfg["solver.max_iters"],
                        em_smoothness=cfg["solver.em_smoothness"],
                    )
                    if cfg["solver.lambda1"] is None and \
                            cfg["solver.lambda1_scale"] != 1.0:
                        base = sco_cfg.resolve_lambda1(2 * radius)
                        sco_cfg.lambda1 = base * float(cfg["solver.lambda1_scale"])
                    domain = Ball(np.zeros(d), radius)
                    model = LossModel(spec.loss)
                    rng = np.random.default_rng(solver_seed)
                    w_hat, run_log = pop_localize(
                        dataset, sco_cfg, model, domain, rng
                    )
                    certified = all(
                        r.certified for r in run_log if not r.skipped
                    )
                    excess = evaluate_excess_risk(spec, w_hat)
                except Exception as exc:  # noqa: BLE001 - sweep must not abort
                    log.append(f"cell n={n} d={d} eps={epsilon} seed={seed}: {exc}")
                    certified = False
                    excess = float("nan")
                runtime_ms = (time.perf_counter() - start) * 1e3
                row = ResultRow(
                    instance=instance_id, n=n, d=d, epsilon=epsilon, delta=delta,
                    seed=seed, solver=cfg["solver.name"], excess_risk=excess,
                    theory_rate=rate, runtime_ms=runtime_ms, certified=certified,
                )
                rows.append(row)
                if writer is not None:
                    writer.writerow(row.to_csv_row())
                    handle.flush()
    finally:
        if handle is not None:
            handle.close()
    return rows


@dataclass
class ProbePair:
    index: int
    stage1_dist: float
    stage1_bound: float
    stage2_dist: float
    stage2_bound: float

    @property
    def stage1_ratio(self):
        return self.stage1_dist / self.stage1_bound

    @property
    def stage2_ratio(self):
        return self.stage2_dist / self.stage2_bound


@dataclass
class ProbeReport:
    loss: str
    pairs: List[ProbePair]

    @property
    def max_stage1_ratio(self):
        return max(p.stage1_ratio for p in self.pairs)

    @property
    def max_stage2_ratio(self):
        return max(p.stage2_ratio for p in self.pairs)

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow([
                "pair", "loss", "stage1_dist", "stage1_bound", "stage1_ratio",
                "stage2_dist", "stage2_bound", "stage2_ratio",
            ])
            for p in self.pairs:
                writer.writerow([
                    p.index, self.loss,
                    f"{p.stage1_dist:.12g}", f"{p.stage1_bound:.12g}",
                    f"{p.stage1_ratio:.12g}",
                    f"{p.stage2_dist:.12g}", f"{p.stage2_bound:.12g}",
                    f"{p.stage2_ratio:.12g}",
                ])


def _probe_sample(rng, scale=1.0):
    a = rng.lognormal(mean=0.0, sigma=0.7) * rng.choice([-1.0, 1.0]) * scale
    b = 0.5 * rng.standard_normal()
    return np.array([a]), float(b)


def sensitivity_probe(loss_kind, pairs, rng, *, n=6, lam=2.0, C=0.8,
                      radius=1.0, stage_solver="auto"):
    """Noise-free neighboring-dataset probe of the two stage maps.

    Stage 1 (coarse minimizer over the full domain) is checked against the
    bound 4C/(lam n); stage 2 (accurate minimizer over a pinned localized
    set) against 3C/(lam m). Ratios above 1 indicate a sensitivity
    calibration bug, which would break the privacy guarantee.
    """
    model = LossModel(loss_kind)
    domain = Ball(np.zeros(1), radius)
    results = []
    for idx in range(pairs):
        drawn = [_probe_sample(rng) for _ in range(n)]
        dataset = Dataset(
            np.vstack([s[0] for s in drawn]), np.array([s[1] for s in drawn])
        )
        swap = int(rng.integers(n))
        neighbor = dataset.replace(swap, _probe_sample(rng))
        w0 = np.array([float(rng.uniform(-0.5 * radius, 0.5 * radius))])
        center = np.array([float(rng.uniform(-0.4 * radius, 0.4 * radius))])
        locdom = LocalizedDomain(domain, center, 0.6 * radius)

        outputs = {"stage1": [], "stage2": []}
        for ds in (dataset, neighbor):
            inst = ErmInstance(
                dataset=ds, model=model, domain=domain, epsilon=1.0,
                lam=lam, w0=w0, C=C,
            )
            w1, _ = minimize_stage(
                inst, domain, inst.stage1_accuracy(), stage_solver
            )
            w2, _ = minimize_stage(
                inst, locdom, inst.stage2_accuracy(), stage_solver
            )
            outputs["stage1"].append(w1)
            outputs["stage2"].append(w2)
        results.append(
            ProbePair(
                index=idx,
                stage1_dist=float(
                    np.linalg.norm(outputs["stage1"][0] - outputs["stage1"][1])
                ),
                stage1_bound=4.0 * C / (lam * n),
                stage2_dist=float(
                    np.linalg.norm(outputs["stage2"][0] - outputs["stage2"][1])
                ),
                stage2_bound=3.0 * C / (lam * n),
            )
        )
    return ProbeReport(loss=loss_kind, pairs=results)
