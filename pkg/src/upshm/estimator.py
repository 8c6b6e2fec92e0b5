"""scikit-learn style wrappers.

``OverloadIndicator`` is a transformer from ``(pdelta, tau_norm)`` rows to OI.
``OffloadingSimulator`` treats a task trace as its input: ``fit`` replays the
trace through the node and keeps the report, ``predict`` returns the
per-task placement (1 local, 0 offloaded). Both follow the estimator
contract, so ``clone``/``set_params``/``ParameterGrid`` work as usual.
"""
from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from . import fuzzy as fz
from .policy import PolicyParams
from .sim import METRICS, SimParams, SimReport, run_simulation
from .workload import TaskTrace


def check_unit_inputs(X) -> np.ndarray:
    """Validate an (n, 2) array of values in [0, 1] (within the fuzzifier's tolerance)."""
    X = check_array(X, dtype=np.float64, ensure_2d=True)
    if X.shape[1] != 2:
        raise ValueError(f"expected 2 columns (pdelta, tau_norm), got {X.shape[1]}")
    if np.any(X < -fz.DOMAIN_TOL) or np.any(X > 1 + fz.DOMAIN_TOL):
        raise ValueError("inputs must lie in [0, 1]")
    return np.clip(X, 0.0, 1.0)


def check_trace(X) -> TaskTrace:
    if not isinstance(X, TaskTrace):
        raise TypeError(f"expected a TaskTrace, got {type(X).__name__}")
    if X.num_tasks == 0:
        raise ValueError("trace has no tasks")
    X.validate()
    return X


class OverloadIndicator(TransformerMixin, BaseEstimator):
    """Fuzzy overload indicator as a stateless transformer.

    Parameters
    ----------
    config : FuzzyConfig, optional
        Full configuration; overrides the other parameters when given.
    defuzz_resolution : int
        Grid points used by the centroid.
    implication, aggregation : str
        Inference operators, see :mod:`upshm.fuzzy`.
    """

    def __init__(self, config=None, defuzz_resolution=1001, implication="product", aggregation="bounded_sum"):
        self.config = config
        self.defuzz_resolution = defuzz_resolution
        self.implication = implication
        self.aggregation = aggregation

    def fit(self, X, y=None):
        check_unit_inputs(X)
        if self.config is not None:
            self.config_ = self.config
        else:
            self.config_ = fz.default_config(self.defuzz_resolution, self.implication, self.aggregation)
        self.n_features_in_ = 2
        return self

    def predict(self, X) -> np.ndarray:
        check_is_fitted(self, "config_")
        X = check_unit_inputs(X)
        return np.array([fz.overload_indicator(self.config_, p, t) for p, t in X])

    def transform(self, X) -> np.ndarray:
        return self.predict(X)[:, None]

    def get_feature_names_out(self, input_features=None):
        return np.array(["oi"], dtype=object)


class OffloadingSimulator(BaseEstimator):
    """Single-node offloading policy evaluated on task traces.

    ``score`` returns the metric named by ``scoring`` (one of phi, eta,
    omega, or ``-psi`` so that larger is always better).
    """

    def __init__(self, policy="UPSHM", beta=0.8, theta_fraction=0.85, capacity=100, trend_window=10,
                 priority_high_threshold=0.5, demand_high_threshold=0.5, fuzzy_config=None, scoring="eta"):
        self.policy = policy
        self.beta = beta
        self.theta_fraction = theta_fraction
        self.capacity = capacity
        self.trend_window = trend_window
        self.priority_high_threshold = priority_high_threshold
        self.demand_high_threshold = demand_high_threshold
        self.fuzzy_config = fuzzy_config
        self.scoring = scoring

    def sim_params(self) -> SimParams:
        return SimParams(
            policy=self.policy,
            policy_params=PolicyParams(self.beta, self.theta_fraction, self.capacity,
                                       self.priority_high_threshold, self.demand_high_threshold),
            fuzzy_config=self.fuzzy_config,
            trend_window=self.trend_window,
        )

    def _simulate(self, X) -> SimReport:
        return run_simulation(check_trace(X), self.sim_params())

    def fit(self, X, y=None):
        self.report_ = self._simulate(X)
        self.theta_ = self.sim_params().policy_params.theta
        return self

    def fit_predict(self, X, y=None) -> np.ndarray:
        self.fit(X)
        return _placements(self.report_)

    def predict(self, X) -> np.ndarray:
        check_is_fitted(self, "report_")
        return _placements(self._simulate(X))

    def score(self, X, y=None) -> float:
        report = self._simulate(X)
        if self.scoring == "-psi":
            return -report.psi
        if self.scoring not in METRICS:
            raise ValueError(f"unknown scoring {self.scoring!r}")
        return getattr(report, self.scoring)


def _placements(report: SimReport) -> np.ndarray:
    return np.array([1 if d.local else 0 for d in report.decisions], dtype=np.int8)
