"""Scikit-learn style estimators wrapping the private solvers.

Rows of X are the per-sample gradient directions a_i and y holds the affine
offsets b_i of the margin a_i^T w + b_i, so `fit(X, y)` privately minimizes
the chosen convex loss over a centered ball. Estimators follow the sklearn
parameter conventions (constructor stores hyperparameters verbatim,
`fit` sets trailing-underscore attributes and returns self), so they compose
with pipelines and model selection utilities.
"""

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.exceptions import NotFittedError

from .erm import ErmInstance, direct_extension_erm, double_outputpert, em_pgm
from .geometry import Ball
from .losses import LossModel, MomentSpec
from .sco import ScoConfig, pop_localize
from .validation import check_X_y


class PrivateERM(BaseEstimator):
    """Pure epsilon-DP regularized empirical risk minimization.

    Parameters mirror one regularized ERM instance: privacy budget, loss
    kind, quadratic regularization strength and center, domain radius, and
    the extension parameter C (derived from the gradient-moment bound when
    omitted).
    """

    def __init__(self, epsilon=1.0, lam=1.0, loss="hinge",
                 solver="double_outputpert", radius=1.0, C=None,
                 k=2.0, G_k=1.0, G_2=None, w0=None, stage_solver="auto",
                 max_iters=None, em_smoothness=None, random_state=None):
        self.epsilon = epsilon
        self.lam = lam
        self.loss = loss
        self.solver = solver
        self.radius = radius
        self.C = C
        self.k = k
        self.G_k = G_k
        self.G_2 = G_2
        self.w0 = w0
        self.stage_solver = stage_solver
        self.max_iters = max_iters
        self.em_smoothness = em_smoothness
        self.random_state = random_state

    def _moment(self):
        g2 = self.G_k if self.G_2 is None else self.G_2
        return MomentSpec(k=self.k, G_k=self.G_k, G_2=g2)

    def fit(self, X, y=None):
        X, y = check_X_y(X, y)
        d = X.shape[1]
        domain = Ball(np.zeros(d), self.radius)
        w0 = np.zeros(d) if self.w0 is None else np.asarray(self.w0, dtype=float)
        from .losses import Dataset

        inst = ErmInstance.create(
            dataset=Dataset(X, y),
            model=LossModel(self.loss),
            domain=domain,
            epsilon=self.epsilon,
            lam=self.lam,
            w0=w0,
            moment=self._moment(),
            C=self.C,
        )
        rng = np.random.default_rng(self.random_state)
        if self.solver == "double_outputpert":
            report = double_outputpert(
                inst, rng, stage_solver=self.stage_solver,
                max_iters=self.max_iters,
            )
            self.coef_, self.report_ = report.output, report
        elif self.solver == "direct_extension":
            report = direct_extension_erm(inst, rng, max_iters=self.max_iters)
            self.coef_, self.report_ = report.output, report
        elif self.solver == "em_pgm":
            self.coef_ = em_pgm(inst, rng, smoothness=self.em_smoothness)
            self.report_ = None
        else:
            raise ValueError(f"unknown solver {self.solver!r}")
        self.n_features_in_ = d
        return self

    def predict(self, X):
        if not hasattr(self, "coef_"):
            raise NotFittedError("call fit before predict")
        X, _ = check_X_y(X)
        if X.shape[1] != self.n_features_in_:
            raise ValueError("feature count changed between fit and predict")
        return X @ self.coef_


class PrivateSCO(BaseEstimator):
    """Pure epsilon-DP stochastic convex optimization via population
    localization around a private regularized ERM solver."""

    def __init__(self, epsilon=1.0, delta=0.1, loss="linear",
                 solver="double_outputpert", radius=1.0, k=2.0, G_k=1.0,
                 G_2=None, lambda1=None, J_override=None, stage_solver="auto",
                 max_iters=None, em_smoothness=None, random_state=None):
        self.epsilon = epsilon
        self.delta = delta
        self.loss = loss
        self.solver = solver
        self.radius = radius
        self.k = k
        self.G_k = G_k
        self.G_2 = G_2
        self.lambda1 = lambda1
        self.J_override = J_override
        self.stage_solver = stage_solver
        self.max_iters = max_iters
        self.em_smoothness = em_smoothness
        self.random_state = random_state

    def fit(self, X, y=None):
        X, y = check_X_y(X, y)
        n, d = X.shape
        from .losses import Dataset

        g2 = self.G_k if self.G_2 is None else self.G_2
        cfg = ScoConfig(
            n=n, d=d, epsilon=self.epsilon, delta=self.delta,
            moment=MomentSpec(k=self.k, G_k=self.G_k, G_2=g2),
            lambda1=self.lambda1, J_override=self.J_override,
            solver=self.solver, stage_solver=self.stage_solver,
            max_iters=self.max_iters, em_smoothness=self.em_smoothness,
        )
        domain = Ball(np.zeros(d), self.radius)
        rng = np.random.default_rng(self.random_state)
        self.coef_, self.log_ = pop_localize(
            Dataset(X, y), cfg, LossModel(self.loss), domain, rng
        )
        self.n_features_in_ = d
        return self

    def predict(self, X):
        if not hasattr(self, "coef_"):
            raise NotFittedError("call fit before predict")
        X, _ = check_X_y(X)
        if X.shape[1] != self.n_features_in_:
            raise ValueError("feature count changed between fit and predict")
        return X @ self.coef_
