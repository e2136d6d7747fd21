"""Observation schedules, hypothesis checks, and product-form gap statistics.

The central claim under test: coordinates of a regenerative process with
dependent cycles, observed at times that diverge and separate fast enough
relative to the coordinates' mean cycle lengths, become asymptotically
independent with marginals given by the cycle formula. The checks here
verify the schedule hypotheses symbolically and measure departures from the
product form empirically.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import stats

from .engine import RegenModel, StateFunction, indicator_le, sample_states
from .errors import ConfigurationError, HypothesisError
from .randomness import as_generator, substream

SCHEDULE_FAMILIES = ("affine", "power")


@dataclass(frozen=True)
class ScheduleCoordinate:
    """One observation clock, ``a * t + b`` (affine) or ``a * t**p``
    (power)."""

    family: str
    a: float
    b: float = 0.0
    p: float = 1.0

    def validate(self) -> "ScheduleCoordinate":
        if self.family not in SCHEDULE_FAMILIES:
            raise ConfigurationError(
                f"unknown schedule family {self.family!r}")
        if not (self.a > 0.0 and math.isfinite(self.a)):
            raise ConfigurationError("schedule slope a must be positive")
        if self.family == "affine":
            if not math.isfinite(self.b):
                raise ConfigurationError("schedule shift b must be finite")
        else:
            if not (self.p >= 0.0 and math.isfinite(self.p)):
                raise ConfigurationError(
                    "schedule exponent p must be finite and >= 0")
        return self

    def value(self, t: float) -> float:
        if self.family == "affine":
            return self.a * t + self.b
        return self.a * t ** self.p

    @property
    def growth_exponent(self) -> float:
        return 1.0 if self.family == "affine" else self.p

    def label(self) -> str:
        if self.family == "affine":
            return (f"{self.a:g}*t{self.b:+g}" if self.b != 0.0
                    else f"{self.a:g}*t")
        return f"{self.a:g}*t^{self.p:g}"


@dataclass(frozen=True)
class ScheduleSpec:
    coordinates: tuple[ScheduleCoordinate, ...]

    @classmethod
    def affine(cls, pairs) -> "ScheduleSpec":
        return cls(tuple(ScheduleCoordinate("affine", float(a), float(b))
                         for a, b in pairs))

    def validate(self) -> "ScheduleSpec":
        if not self.coordinates:
            raise ConfigurationError("schedule needs at least one coordinate")
        for c in self.coordinates:
            c.validate()
        return self

    def values(self, t: float) -> np.ndarray:
        return np.array([c.value(t) for c in self.coordinates])


def _liminf_ratio(lo: ScheduleCoordinate, hi: ScheduleCoordinate) -> float:
    """liminf of v_lo(t) / v_hi(t) as t -> inf."""
    if lo.growth_exponent > hi.growth_exponent:
        return math.inf
    if lo.growth_exponent < hi.growth_exponent:
        return 0.0
    return lo.a / hi.a


@dataclass(frozen=True)
class HypothesisVerdict:
    """Outcome of the separation check.

    ``order`` sorts coordinates by ascending mean cycle length (faster
    coordinates need later, larger observation times). For consecutive
    coordinates in that order, ``ratios[k]`` is the liminf of the earlier
    schedule over the later one and must strictly exceed ``bounds[k]``, the
    ratio of the mean cycle lengths. ``witness`` names the first violating
    pair in original coordinate labels.
    """

    passed: bool
    order: tuple[int, ...]
    ratios: tuple[float, ...]
    bounds: tuple[float, ...]
    diverges: bool
    witness: tuple[int, int] | None

    def to_json_dict(self) -> dict:
        return {
            "passed": self.passed,
            "order": list(self.order),
            "ratios": [_json_float(r) for r in self.ratios],
            "bounds": [_json_float(b) for b in self.bounds],
            "diverges": self.diverges,
            "witness": list(self.witness) if self.witness else None,
        }


def _json_float(x: float):
    return x if math.isfinite(x) else ("inf" if x > 0 else "-inf")


def check_hypotheses(schedule: ScheduleSpec, cycle_means) -> HypothesisVerdict:
    """Decide whether a schedule separates coordinates fast enough.

    Coordinates are sorted by ascending mean cycle length; ties keep the
    configured order (the check is syntactic in the labels, so with equal
    means the caller must list faster-growing schedules first to pass).
    """
    schedule.validate()
    means = tuple(float(x) for x in cycle_means)
    coords = schedule.coordinates
    if len(means) != len(coords):
        raise ConfigurationError(
            "schedule and model disagree on the number of coordinates")
    for mu in means:
        if not (mu > 0.0 and math.isfinite(mu)):
            raise ConfigurationError("cycle means must be positive and finite")
    order = tuple(sorted(range(len(coords)), key=lambda i: means[i]))
    ratios = []
    bounds = []
    witness = None
    for k in range(len(order) - 1):
        i, j = order[k], order[k + 1]
        r = _liminf_ratio(coords[i], coords[j])
        ratios.append(r)
        bounds.append(means[i] / means[j])
        if witness is None and not r > bounds[-1]:
            witness = (i, j)
    last = coords[order[-1]]
    diverges = last.growth_exponent > 0.0
    return HypothesisVerdict(passed=diverges and witness is None,
                             order=order, ratios=tuple(ratios),
                             bounds=tuple(bounds), diverges=diverges,
                             witness=witness)


def sample_joint(model: RegenModel, schedule: ScheduleSpec, t: float, fs,
                 replications: int, seed: int, *,
                 allow_hypothesis_fail: bool = False,
                 threads: int | None = None,
                 base_key: tuple[int, ...] = (101, 0)) -> np.ndarray:
    """(replications, m) matrix of f_i applied to coordinate i observed at
    v_i(t), joint across coordinates within a row, i.i.d. across rows."""
    verdict = check_hypotheses(schedule, model.cycle_means)
    if not verdict.passed and not allow_hypothesis_fail:
        raise HypothesisError(verdict)
    times = schedule.values(t)
    if np.any(times <= 0.0):
        raise ValueError(f"schedule times at t={t} are not all positive")
    if len(fs) != model.dimension:
        raise ValueError("one test function per coordinate is required")
    states = sample_states(model, times, replications, seed,
                           base_key=base_key, threads=threads)
    return np.column_stack([np.asarray(fs[i](states[i]), dtype=float)
                            for i in range(model.dimension)])


@dataclass(frozen=True)
class GapEstimate:
    """Empirical departure from the product form for one (t, f-tuple)."""

    t: float
    f_id: str
    n: int
    gap: float
    se: float
    mean_of_products: float
    marginal_means: tuple[float, ...]
    marginal_ses: tuple[float, ...]
    degenerate: bool = False

    def to_json_dict(self) -> dict:
        return {
            "t": self.t, "f_id": self.f_id, "n": self.n,
            "gap": self.gap, "se": self.se,
            "mean_of_products": self.mean_of_products,
            "marginal_means": list(self.marginal_means),
            "marginal_ses": list(self.marginal_ses),
            "degenerate": self.degenerate,
        }


def product_form_gap(samples: np.ndarray, rng, *, resamples: int = 400,
                     t: float = math.nan, f_id: str = "f") -> GapEstimate:
    """``| mean prod_i f_i  -  prod_i mean f_i |`` with a bootstrap SE.

    The statistic only sees the sample matrix, so it is invariant under
    permuting replications. A zero bootstrap spread (e.g. constant columns)
    is flagged as degenerate rather than treated as infinitely precise.
    """
    s = np.asarray(samples, dtype=float)
    if s.ndim != 2:
        raise ValueError("samples must be a (replications, m) matrix")
    n, m = s.shape
    if n < 1000:
        raise ValueError("need at least 1000 replications for a stable gap")
    gen = as_generator(rng)
    col_means = s.mean(axis=0)
    gap = abs(float(s.prod(axis=1).mean()) - float(col_means.prod()))
    boot = np.empty(resamples)
    for b in range(resamples):
        rows = s[gen.integers(0, n, n)]
        boot[b] = abs(float(rows.prod(axis=1).mean())
                      - float(rows.mean(axis=0).prod()))
    se = float(boot.std(ddof=1))
    return GapEstimate(
        t=float(t), f_id=str(f_id), n=n, gap=gap, se=se,
        mean_of_products=float(s.prod(axis=1).mean()),
        marginal_means=tuple(float(v) for v in col_means),
        marginal_ses=tuple(float(v) for v in s.std(axis=0, ddof=1)
                           / math.sqrt(n)),
        degenerate=bool(se == 0.0))


@dataclass(frozen=True)
class SweepResult:
    t_grid: tuple[float, ...]
    gaps: tuple[GapEstimate, ...]
    trend: float

    def worst_gaps(self) -> np.ndarray:
        """Largest gap across f-tuples at each grid time."""
        out = []
        for t in self.t_grid:
            out.append(max(g.gap for g in self.gaps if g.t == t))
        return np.array(out)

    def at_final_t(self) -> tuple[GapEstimate, ...]:
        return tuple(g for g in self.gaps if g.t == self.t_grid[-1])


def convergence_sweep(model: RegenModel, schedule: ScheduleSpec, t_grid,
                      f_tuples, replications: int, seed: int, *,
                      allow_hypothesis_fail: bool = False,
                      resamples: int = 400,
                      threads: int | None = None) -> SweepResult:
    """Gap estimates over an increasing time grid plus the Spearman trend of
    the worst gap against t (negative means the gap is shrinking)."""
    grid = tuple(float(t) for t in t_grid)
    if len(grid) < 3 or any(b <= a for a, b in zip(grid, grid[1:])):
        raise ValueError("t_grid must be strictly increasing with >= 3 points")
    if replications < 1000:
        raise ValueError("need at least 1000 replications")
    verdict = check_hypotheses(schedule, model.cycle_means)
    if not verdict.passed and not allow_hypothesis_fail:
        raise HypothesisError(verdict)
    gaps = []
    worst = []
    for k, t in enumerate(grid):
        states = sample_states(model, schedule.values(t), replications, seed,
                               base_key=(101, k), threads=threads)
        here = []
        for j, (f_id, fs) in enumerate(f_tuples):
            mat = np.column_stack([np.asarray(fs[i](states[i]), dtype=float)
                                   for i in range(model.dimension)])
            est = product_form_gap(mat, substream(seed, 907, k, j),
                                   resamples=resamples, t=t, f_id=f_id)
            gaps.append(est)
            here.append(est.gap)
        worst.append(max(here))
    if len(set(worst)) == 1:
        trend = 0.0
    else:
        trend = float(stats.spearmanr(grid, worst).statistic)
    return SweepResult(t_grid=grid, gaps=tuple(gaps), trend=trend)


def final_gap_verdict(sweep: SweepResult, gap_floor: float = 0.02,
                      z_limit: float = 3.0) -> tuple[bool, list[dict]]:
    """Pass/fail rule at the last grid time, shared by the CLI and the
    calibration checks: every f-tuple's gap must stay below
    ``max(gap_floor, z_limit * SE)``."""
    per_tuple = []
    passed = True
    for g in sweep.at_final_t():
        threshold = max(gap_floor, z_limit * g.se)
        ok = bool(g.gap <= threshold)
        passed = passed and ok
        per_tuple.append({"f_id": g.f_id, "gap": g.gap, "se": g.se,
                          "threshold": threshold,
                          "degenerate": g.degenerate, "ok": ok})
    return passed, per_tuple


@dataclass(frozen=True)
class Ks2Result:
    distance: float
    p_value: float
    grid: int
    permutations: int


def independence_ks2(x, y, rng, *, grid: int = 32,
                     permutations: int = 200) -> Ks2Result:
    """Grid-based two-sample independence check with a permutation p-value.

    The statistic is the sup over a quantile grid of
    ``| P_hat(X <= qx, Y <= qy) - P_hat(X <= qx) P_hat(Y <= qy) |``.
    """
    x = np.ravel(np.asarray(x, dtype=float))
    y = np.ravel(np.asarray(y, dtype=float))
    if len(x) != len(y):
        raise ValueError("x and y must pair up")
    n = len(x)
    if n < 10_000:
        raise ValueError("need at least 10000 paired samples")
    gen = as_generator(rng)
    levels = np.arange(1, grid + 1) / (grid + 1.0)
    ax = (x[:, None] <= np.quantile(x, levels)).astype(np.float32)
    ay = (y[:, None] <= np.quantile(y, levels)).astype(np.float32)

    def distance(bmat: np.ndarray) -> float:
        joint = ax.T @ bmat / n
        return float(np.abs(joint - np.outer(ax.mean(axis=0),
                                             bmat.mean(axis=0))).max())

    observed = distance(ay)
    exceed = 0
    for _ in range(permutations):
        if distance(ay[gen.permutation(n)]) >= observed - 1e-12:
            exceed += 1
    return Ks2Result(distance=observed,
                     p_value=(1.0 + exceed) / (permutations + 1.0),
                     grid=grid, permutations=permutations)


def quantile_indicator_tuples(model: RegenModel, burn_in: float, seed: int, *,
                              levels: tuple[float, ...] = (0.25, 0.5, 0.75),
                              prepass: int = 10_000,
                              threads: int | None = None
                              ) -> list[tuple[str, tuple[StateFunction, ...]]]:
    """Default test-function bank: per-coordinate threshold indicators at
    common stationary quantile levels, thresholds fixed by a pre-pass."""
    states = sample_states(model, [burn_in] * model.dimension, prepass, seed,
                           base_key=(31,), threads=threads)
    tuples = []
    for q in levels:
        fs = tuple(indicator_le(float(np.quantile(states[i][:, 0], q)))
                   for i in range(model.dimension))
        tuples.append((f"q{int(round(q * 100))}", fs))
    return tuples
