"""Mamdani inference for the overload indicator (OI).

Two inputs, the overload probability and the normalized service-rate trend,
each described by five triangular terms; one five-term output. Rules combine
antecedents with ``min``. By default each consequent is scaled by its firing
strength (product implication) and the scaled sets are summed, capped at 1.
The crisp OI is the centroid of the aggregate sampled on a uniform grid over
[0, 1].

The classic ``implication="min"``/``aggregation="max"`` pair is available, but
under it OI is not monotone in its inputs: two rules sharing a consequent mask
each other under ``max``, so lowering one of them can pull the centroid the
wrong way (by up to ~4e-3 with the default rule table).
"""
from __future__ import annotations

import json
import math
import os
import warnings
from collections.abc import Sequence
from dataclasses import dataclass, field, replace
from functools import cached_property

import numpy as np

N_TERMS = 5
DOMAIN_TOL = 1e-9

LEVEL_LABELS = ("extreme low", "low", "medium", "high", "extreme high")
TREND_LABELS = ("high negative", "low negative", "neutral", "low positive", "high positive")
DEFAULT_PEAKS = (0.0, 0.25, 0.5, 0.75, 1.0)
IMPLICATIONS = ("product", "min")
AGGREGATIONS = ("bounded_sum", "max")


class EmptyFuzzySetWarning(RuntimeWarning):
    """No rule fired; the defuzzifier fell back to the domain midpoint."""


@dataclass(frozen=True)
class TriangularMF:
    """Triangle with feet ``a``, ``c`` and peak ``b``.

    ``a == b`` or ``b == c`` give left/right shoulders: the degenerate side
    is a vertical edge, so membership is 1 right at the peak.
    """

    a: float
    b: float
    c: float

    def __post_init__(self):
        if not self.a <= self.b <= self.c:
            raise ValueError(f"need a <= b <= c, got {(self.a, self.b, self.c)}")

    def __call__(self, x):
        return membership(self, x)


def membership(mf: TriangularMF, x):
    """Membership degree of ``x`` (scalar or array) in ``mf``."""
    a, b, c = mf.a, mf.b, mf.c
    xs = np.asarray(x, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        rising = np.where(xs < b, (xs - a) / (b - a) if b > a else 0.0, 1.0)
        falling = np.where(xs > b, (c - xs) / (c - b) if c > b else 0.0, 1.0)
    out = np.clip(np.minimum(rising, falling), 0.0, 1.0)
    out = np.where((xs < a) | (xs > c), 0.0, out)
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class LinguisticVariable:
    name: str
    terms: tuple[tuple[str, TriangularMF], ...]
    domain: tuple[float, float] = (0.0, 1.0)

    def __post_init__(self):
        object.__setattr__(self, "terms", tuple((str(lbl), mf) for lbl, mf in self.terms))
        if len(self.terms) != N_TERMS:
            raise ValueError(f"{self.name}: expected {N_TERMS} terms, got {len(self.terms)}")
        peaks = [mf.b for _, mf in self.terms]
        if any(p2 <= p1 for p1, p2 in zip(peaks, peaks[1:])):
            raise ValueError(f"{self.name}: term peaks must be strictly increasing, got {peaks}")
        lo, hi = self.domain
        probe = np.linspace(lo, hi, 2001)
        cover = np.max([mf(probe) for _, mf in self.terms], axis=0)
        if np.any(cover <= 0):
            gap = float(probe[np.argmax(cover <= 0)])
            raise ValueError(f"{self.name}: terms leave x={gap} uncovered")

    @property
    def labels(self) -> tuple[str, ...]:
        return tuple(lbl for lbl, _ in self.terms)

    @classmethod
    def from_peaks(cls, name: str, peaks: Sequence[float], labels: Sequence[str] = LEVEL_LABELS,
                   domain: tuple[float, float] = (0.0, 1.0)) -> LinguisticVariable:
        """Partition where each triangle's feet sit on the neighbouring peaks."""
        peaks = [float(p) for p in peaks]
        if len(peaks) != N_TERMS:
            raise ValueError(f"{name}: expected {N_TERMS} peaks, got {len(peaks)}")
        terms = []
        for i, p in enumerate(peaks):
            a = peaks[i - 1] if i > 0 else p
            c = peaks[i + 1] if i < N_TERMS - 1 else p
            terms.append((labels[i], TriangularMF(a, p, c)))
        return cls(name, tuple(terms), domain)


def fuzzify(var: LinguisticVariable, x: float) -> np.ndarray:
    lo, hi = var.domain
    if x < lo - DOMAIN_TOL or x > hi + DOMAIN_TOL or math.isnan(x):
        raise ValueError(f"{var.name}: {x} outside domain [{lo}, {hi}]")
    x = min(max(x, lo), hi)
    return np.array([mf(x) for _, mf in var.terms])


@dataclass(frozen=True)
class RuleBase:
    """``table[i][j]`` is the OI term for overload-probability term ``i`` and trend term ``j``."""

    table: tuple[tuple[int, ...], ...]

    def __post_init__(self):
        table = tuple(tuple(int(v) for v in row) for row in self.table)
        object.__setattr__(self, "table", table)
        if len(table) != N_TERMS or any(len(row) != N_TERMS for row in table):
            raise ValueError(f"rule table must be {N_TERMS}x{N_TERMS}")
        if any(not 0 <= v < N_TERMS for row in table for v in row):
            raise ValueError(f"rule consequents must be term indices in 0..{N_TERMS - 1}")

    def __len__(self):
        return N_TERMS * N_TERMS

    def __getitem__(self, key: tuple[int, int]) -> int:
        i, j = key
        return self.table[i][j]

    def rules(self):
        """Yield ``(pdelta_term, trend_term, oi_term)`` for all 25 rules."""
        for i, row in enumerate(self.table):
            for j, out in enumerate(row):
                yield i, j, out

    @classmethod
    def default(cls) -> RuleBase:
        # round-half-up of the mean of overload level and reversed trend level
        return cls(tuple(tuple((i + (N_TERMS - 1 - j) + 1) // 2 for j in range(N_TERMS))
                         for i in range(N_TERMS)))


def sample_grid(resolution: int) -> np.ndarray:
    """Uniform grid on [0, 1]; built from integers so it is mirror-exact about 0.5."""
    n = resolution - 1
    return np.array([i / n if 2 * i <= n else 1.0 - (n - i) / n for i in range(resolution)])


@dataclass(frozen=True)
class FuzzyConfig:
    var_pdelta: LinguisticVariable
    var_tau: LinguisticVariable
    var_oi: LinguisticVariable
    rulebase: RuleBase = field(default_factory=RuleBase.default)
    defuzz_resolution: int = 1001
    implication: str = "product"
    aggregation: str = "bounded_sum"

    def __post_init__(self):
        if self.defuzz_resolution < 101:
            raise ValueError("defuzz_resolution must be >= 101")
        if self.implication not in IMPLICATIONS:
            raise ValueError(f"implication must be one of {IMPLICATIONS}, got {self.implication!r}")
        if self.aggregation not in AGGREGATIONS:
            raise ValueError(f"aggregation must be one of {AGGREGATIONS}, got {self.aggregation!r}")
        for var in (self.var_pdelta, self.var_tau, self.var_oi):
            if tuple(var.domain) != (0.0, 1.0):
                raise ValueError(f"{var.name}: domain must be [0, 1]")

    @cached_property
    def grid(self) -> np.ndarray:
        return sample_grid(self.defuzz_resolution)

    @cached_property
    def output_samples(self) -> np.ndarray:
        """Each OI term's membership on the grid, shape (5, resolution)."""
        return np.array([mf(self.grid) for _, mf in self.var_oi.terms])

    def with_resolution(self, resolution: int) -> FuzzyConfig:
        return replace(self, defuzz_resolution=resolution)


def default_config(defuzz_resolution: int = 1001, implication: str = "product",
                   aggregation: str = "bounded_sum") -> FuzzyConfig:
    return FuzzyConfig(
        var_pdelta=LinguisticVariable.from_peaks("pdelta", DEFAULT_PEAKS, LEVEL_LABELS),
        var_tau=LinguisticVariable.from_peaks("tau", DEFAULT_PEAKS, TREND_LABELS),
        var_oi=LinguisticVariable.from_peaks("oi", DEFAULT_PEAKS, LEVEL_LABELS),
        rulebase=RuleBase.default(),
        defuzz_resolution=defuzz_resolution,
        implication=implication,
        aggregation=aggregation,
    )


def firing_strengths(config: FuzzyConfig, pdelta: float, tau_norm: float) -> np.ndarray:
    """5x5 matrix of rule firing strengths (min of the two antecedent memberships)."""
    mp = fuzzify(config.var_pdelta, pdelta)
    mt = fuzzify(config.var_tau, tau_norm)
    return np.minimum.outer(mp, mt)


def infer(config: FuzzyConfig, pdelta: float, tau_norm: float) -> np.ndarray:
    """Aggregated output set sampled on ``config.grid``."""
    strengths = firing_strengths(config, pdelta, tau_norm)
    outputs = config.output_samples
    if config.implication == "min" and config.aggregation == "max":
        # max over rules of clipped sets == each consequent clipped at its strongest rule
        level = np.zeros(N_TERMS)
        for i, j, out in config.rulebase.rules():
            level[out] = max(level[out], strengths[i, j])
        return np.minimum(outputs, level[:, None]).max(axis=0)
    rule_sets = []
    for i, j, out in config.rulebase.rules():
        s = strengths[i, j]
        if s > 0:
            rule_sets.append(outputs[out] * s if config.implication == "product" else np.minimum(outputs[out], s))
    if not rule_sets:
        return np.zeros_like(config.grid)
    stacked = np.array(rule_sets)
    if config.aggregation == "max":
        return stacked.max(axis=0)
    return np.minimum(1.0, stacked.sum(axis=0))


def defuzzify_centroid(samples, grid=None) -> float:
    """Centre of mass of a sampled fuzzy set.

    An all-zero set has no centroid; this warns with
    :class:`EmptyFuzzySetWarning` and returns 0.5.
    """
    samples = np.asarray(samples, dtype=float)
    if grid is None:
        grid = sample_grid(len(samples))
    total = math.fsum(samples)
    if total <= 0:
        warnings.warn("empty output set, returning 0.5", EmptyFuzzySetWarning, stacklevel=2)
        return 0.5
    # moments about the midpoint cancel exactly for mirror-symmetric sets
    offset = math.fsum((np.asarray(grid) - 0.5) * samples) / total
    return min(1.0, max(0.0, 0.5 + offset))


def overload_indicator(config: FuzzyConfig, pdelta: float, tau_norm: float) -> float:
    return defuzzify_centroid(infer(config, pdelta, tau_norm), config.grid)


# -- config files -----------------------------------------------------------

def _variable_from_dict(name: str, body: dict, default_labels) -> LinguisticVariable:
    labels = body.get("labels", default_labels)
    if "triangles" in body:
        tris = body["triangles"]
        if len(labels) != len(tris):
            raise ValueError(f"{name}: {len(labels)} labels for {len(tris)} triangles")
        return LinguisticVariable(name, tuple((lbl, TriangularMF(*map(float, t))) for lbl, t in zip(labels, tris)))
    return LinguisticVariable.from_peaks(name, body.get("peaks", DEFAULT_PEAKS), labels)


def config_from_dict(data: dict) -> FuzzyConfig:
    """Build a :class:`FuzzyConfig` from the JSON-level schema.

    ``variables`` maps ``pdelta``/``tau``/``oi`` to ``{"labels": [...],
    "peaks": [...]}`` or ``{"labels": [...], "triangles": [[a, b, c], ...]}``.
    ``rules`` is a 5x5 matrix of OI labels, rows by pdelta term, columns by
    trend term. ``implication`` is ``product``/``min`` and ``aggregation``
    ``bounded_sum``/``max``. Anything omitted falls back to
    :func:`default_config`.
    """
    if not isinstance(data, dict):
        raise ValueError("fuzzy config must be a JSON object")
    unknown = set(data) - {"variables", "rules", "defuzz_resolution", "implication", "aggregation"}
    if unknown:
        raise ValueError(f"unknown fuzzy config keys: {sorted(unknown)}")
    variables = data.get("variables", {})
    unknown = set(variables) - {"pdelta", "tau", "oi"}
    if unknown:
        raise ValueError(f"unknown fuzzy variables: {sorted(unknown)}")
    var_p = _variable_from_dict("pdelta", variables.get("pdelta", {}), LEVEL_LABELS)
    var_t = _variable_from_dict("tau", variables.get("tau", {}), TREND_LABELS)
    var_o = _variable_from_dict("oi", variables.get("oi", {}), LEVEL_LABELS)
    if "rules" in data:
        rows = data["rules"]
        if len(rows) != N_TERMS or any(len(r) != N_TERMS for r in rows):
            raise ValueError(f"rules must be a {N_TERMS}x{N_TERMS} matrix")
        lookup = {lbl: k for k, lbl in enumerate(var_o.labels)}
        try:
            rulebase = RuleBase(tuple(tuple(lookup[lbl] for lbl in row) for row in rows))
        except KeyError as exc:
            raise ValueError(f"rule consequent {exc.args[0]!r} is not an OI term {var_o.labels}") from None
    else:
        rulebase = RuleBase.default()
    return FuzzyConfig(var_p, var_t, var_o, rulebase, int(data.get("defuzz_resolution", 1001)),
                       data.get("implication", "product"), data.get("aggregation", "bounded_sum"))


def config_to_dict(config: FuzzyConfig) -> dict:
    def var(v: LinguisticVariable):
        return {"labels": list(v.labels), "triangles": [[mf.a, mf.b, mf.c] for _, mf in v.terms]}

    return {
        "variables": {"pdelta": var(config.var_pdelta), "tau": var(config.var_tau), "oi": var(config.var_oi)},
        "rules": [[config.var_oi.labels[v] for v in row] for row in config.rulebase.table],
        "defuzz_resolution": config.defuzz_resolution,
        "implication": config.implication,
        "aggregation": config.aggregation,
    }


def load_fuzzy_config(path: str | os.PathLike) -> FuzzyConfig:
    with open(path, encoding="utf-8") as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ValueError(f"{path}:{exc.lineno}: invalid JSON: {exc.msg}") from None
    try:
        return config_from_dict(data)
    except (TypeError, ValueError) as exc:
        raise ValueError(f"{path}: {exc}") from None
