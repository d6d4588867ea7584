"""Lipschitz extension of per-sample losses via infimal convolution with
C * ||.||, the jointly convex reformulation over (w, y_1..y_m), approximate
value/subgradient oracles, and a bias diagnostic.

The inner problem min_{y in W} f(y, z) + C ||w - y|| is solved exactly where
the affine-margin structure admits a closed form (one-dimensional domains,
or whenever the unconstrained minimizer is feasible) and by the certified
adaptive solver otherwise.
"""

import numpy as np

from .geometry import interval_bounds
from .subgrad import adaptive_projsubgrad
from .validation import as_vector, check_positive


class InnerSolveError(RuntimeError):
    """Inner extension solve hit its iteration cap; carries the partial run."""

    def __init__(self, message, point=None, certificate=None):
        super().__init__(message)
        self.point = point
        self.certificate = certificate


def joint_objective(model, dataset, C, lam, w0, w, ys):
    """Phi(w, y_1..y_m) = mean_i [f(y_i, z_i) + C ||w - y_i||] + lam/2 ||w - w0||^2."""
    w = as_vector(w, dim=dataset.d, name="w")
    ys = np.asarray(ys, dtype=float)
    if ys.shape != (dataset.n, dataset.d):
        raise ValueError(
            f"ys must have shape {(dataset.n, dataset.d)}, got {ys.shape}"
        )
    margins = np.einsum("ij,ij->i", dataset.a, ys) + dataset.b
    if model.kind == "linear":
        vals = margins
    elif model.kind == "hinge":
        vals = np.maximum(0.0, margins)
    else:
        vals = np.abs(margins)
    norms = np.linalg.norm(w[None, :] - ys, axis=1)
    reg = 0.5 * lam * float(np.dot(w - w0, w - w0))
    return float(np.mean(vals + C * norms)) + reg


def joint_subgradient(model, dataset, C, lam, w0, w, ys):
    """Block subgradient of the joint objective.

    Returns (g_w, g_ys) with g_w = (C/m) sum_i s_i + lam (w - w0) and
    g_ys[i] = (g_i - C s_i) / m, where s_i is the unit vector (w - y_i) /
    ||w - y_i|| (zero when w = y_i) and g_i a loss subgradient at y_i.
    """
    w = as_vector(w, dim=dataset.d, name="w")
    ys = np.asarray(ys, dtype=float)
    m = dataset.n
    diffs = w[None, :] - ys
    norms = np.linalg.norm(diffs, axis=1)
    s = np.zeros_like(diffs)
    nz = norms > 0.0
    s[nz] = diffs[nz] / norms[nz, None]
    margins = np.einsum("ij,ij->i", dataset.a, ys) + dataset.b
    g_i = model.scalar_slopes(margins)[:, None] * dataset.a
    g_w = (C / m) * s.sum(axis=0) + lam * (w - w0)
    g_ys = (g_i - C * s) / m
    return g_w, g_ys


def pack_joint(w, ys):
    return np.concatenate([np.asarray(w, dtype=float).ravel(),
                           np.asarray(ys, dtype=float).ravel()])


def unpack_joint(x, m, d):
    x = np.asarray(x, dtype=float)
    return x[:d], x[d:].reshape(m, d)


def make_joint_oracle(model, dataset, C, lam, w0):
    """(grad_fn, value_fn) over the flattened joint point."""
    m, d = dataset.n, dataset.d

    def grad_fn(x):
        w, ys = unpack_joint(x, m, d)
        g_w, g_ys = joint_subgradient(model, dataset, C, lam, w0, w, ys)
        return pack_joint(g_w, g_ys)

    def value_fn(x):
        w, ys = unpack_joint(x, m, d)
        return joint_objective(model, dataset, C, lam, w0, w, ys)

    return grad_fn, value_fn


def extension_values_1d(model, a, b, w, lo, hi, C):
    """Exact f_C(w, z) for scalar samples z = (a, b) over the interval [lo, hi].

    `w` may be a scalar or a grid; the result broadcasts to shape
    (*shape(w), len(a)). The minimizer of the inner piecewise-linear problem
    lies at a breakpoint: the query point, the zero-margin point, or an
    interval endpoint.
    """
    a = np.atleast_1d(np.asarray(a, dtype=float))
    b = np.atleast_1d(np.asarray(b, dtype=float))
    w_arr = np.asarray(w, dtype=float)
    scalar_in = w_arr.ndim == 0
    w_col = w_arr.reshape(-1, 1)  # (G, 1)

    safe_a = np.where(a == 0.0, 1.0, a)
    s0 = np.clip(np.where(a != 0.0, -b / safe_a, lo), lo, hi)  # (m,)
    n_w, m = w_col.shape[0], a.shape[0]
    cands = np.empty((n_w, m, 4))
    cands[:, :, 0] = np.clip(w_col, lo, hi)
    cands[:, :, 1] = s0[None, :]
    cands[:, :, 2] = lo
    cands[:, :, 3] = hi
    margins = a[None, :, None] * cands + b[None, :, None]
    if model.kind == "linear":
        vals = margins
    elif model.kind == "hinge":
        vals = np.maximum(0.0, margins)
    else:
        vals = np.abs(margins)
    phi = vals + C * np.abs(w_col[:, :, None] - cands)
    out = phi.min(axis=-1)
    return out[0] if scalar_in else out


def _inner_1d(model, sample, w, domain, C):
    """Exact inner minimizer and value for a one-dimensional domain."""
    lo, hi = interval_bounds(domain)
    a = float(np.asarray(sample[0]).ravel()[0])
    b = float(sample[1])
    w_s = float(np.asarray(w).ravel()[0])
    cands = [min(max(w_s, lo), hi), lo, hi]
    if a != 0.0:
        cands.append(min(max(-b / a, lo), hi))

    def phi(y):
        margin = a * y + b
        if model.kind == "linear":
            v = margin
        elif model.kind == "hinge":
            v = max(0.0, margin)
        else:
            v = abs(margin)
        return v + C * abs(w_s - y)

    best = min(cands, key=phi)
    return np.array([best]), phi(best)


def inner_minimize(model, sample, w, domain, C, accuracy, cap=None):
    """Minimize phi(y) = f(y, z) + C ||w - y|| over the domain.

    Returns (y_hat, value, exact). Closed-form branches are exact; otherwise
    the certified adaptive solver is run to the requested value accuracy
    (raising InnerSolveError if it hits its iteration cap).
    """
    C = check_positive(C, "C")
    w = as_vector(w, dim=domain.dim, name="w")
    if domain.dim == 1:
        y, val = _inner_1d(model, sample, w, domain, C)
        return y, val, True

    a = np.asarray(sample[0], dtype=float)
    b = float(sample[1])
    margin = float(np.dot(a, w)) + b
    norm_a = float(np.linalg.norm(a))

    if model.kind == "hinge" and margin <= 0.0:
        return w.copy(), 0.0, True
    if model.kind == "absolute" and margin == 0.0:
        return w.copy(), 0.0, True
    if norm_a <= C:
        # The loss is already C-Lipschitz along every direction: y = w.
        return w.copy(), model.value(w, sample), True
    y_unc = None
    if model.kind in ("hinge", "absolute"):
        y_unc = w - (margin / norm_a**2) * a
        if domain.contains(y_unc):
            return y_unc, C * abs(margin) / norm_a, True

    def grad(y):
        g = model.subgradient(y, sample)
        diff = y - w
        norm = float(np.linalg.norm(diff))
        if norm > 0.0:
            g = g + (C / norm) * diff
        return g

    start = domain.project(y_unc if y_unc is not None else w)
    check_positive(accuracy, "accuracy")
    y_hat, cert = adaptive_projsubgrad(domain, grad, accuracy, x0=start, cap=cap)
    value = model.value(y_hat, sample) + C * float(np.linalg.norm(w - y_hat))
    if not cert.certified:
        raise InnerSolveError(
            "inner extension solve exceeded its iteration cap",
            point=y_hat,
            certificate=cert,
        )
    return y_hat, value, False


def extension_value_approx(model, sample, w, domain, C, alpha_in):
    """Approximate extension value: f_C(w,z) <= returned <= f_C(w,z) + alpha_in.

    Also returns the inner (approximate) minimizer.
    """
    check_positive(alpha_in, "alpha_in")
    y_hat, value, _ = inner_minimize(model, sample, w, domain, C, alpha_in)
    return value, y_hat


def extension_subgradient_approx(model, sample, w, domain, C, B):
    """B-approximate subgradient of the extension f_C(., z) at w, norm <= C.

    Solves the inner problem to accuracy B/2 obtaining y_hat; when y_hat is
    well-separated from w the normalized direction C (w - y_hat)/||w - y_hat||
    is returned, otherwise a loss subgradient at w clipped to norm C (exact
    in the regime where w itself minimizes the inner problem).
    """
    B = check_positive(B, "B")
    C = check_positive(C, "C")
    w = as_vector(w, dim=domain.dim, name="w")
    y_hat, _, _ = inner_minimize(model, sample, w, domain, C, B / 2.0)
    diff = w - y_hat
    dist = float(np.linalg.norm(diff))
    if dist > B / (2.0 * C):
        return (C / dist) * diff
    g = model.subgradient(w, sample)
    norm = float(np.linalg.norm(g))
    if norm <= C:
        return g
    return (C / norm) * g


def extension_bias_diag(model, dataset, domain, C):
    """Upper bound diam * mean_i (A(z_i) - C)_+ on the extension bias
    max_w (empirical loss - empirical extension) over the domain."""
    check_positive(C, "C")
    lips = np.linalg.norm(dataset.a, axis=1)
    return float(domain.diameter_bound * np.mean(np.maximum(lips - C, 0.0)))


def make_scalar_extension_objective(model, dataset, C, lam, w0, inner_domain):
    """Scalar callable w -> mean_i f_C(w, z_i) + lam/2 (w - w0)^2 for d = 1.

    The extension's inner problem ranges over the full base domain
    `inner_domain` regardless of the (possibly localized) outer interval the
    caller optimizes over.
    """
    lo, hi = interval_bounds(inner_domain)
    a = dataset.a[:, 0]
    b = dataset.b
    w0_s = float(np.asarray(w0).ravel()[0])

    def objective(w):
        vals = extension_values_1d(model, a, b, float(w), lo, hi, C)
        return float(np.mean(vals) + 0.5 * lam * (float(w) - w0_s) ** 2)

    return objective
