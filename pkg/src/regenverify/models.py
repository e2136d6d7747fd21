"""Bundled model families, each exposed as a :class:`RegenModel`.

- storage/queue processes driven by negative drift, compound-Poisson input,
  and dependent restart levels drawn at each emptiness epoch
- clearing (growth-collapse) processes with dependent clearing times
- status-updating freshness indicators with dependent inter-update times
- open Jackson networks regenerating at empty-system epochs

Every family provides the per-cycle generator used by the generic engine;
the renewal-driven families and the Jackson family also carry a vectorised
stationary-window sampler that the tests cross-check against the generator.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate

from .errors import (ArithmeticCyclesWarning, BudgetExceededError,
                     ConfigurationError)
from .engine import CyclePath, RegenModel, linear_path, run_chunked
from .randomness import (DependenceSpec, MarginalSpec, effective_arithmetic,
                         effective_cycle_mean, effective_second_moment,
                         sample_cycle_vector, sample_cycle_vectors, substream)
from .renewal import equilibrium_tail, mean_excess

MAX_EVENTS_PER_CYCLE = 10_000_000

# target element count per temporary block in the vectorised samplers;
# block geometry depends only on the scenario, never on thread count
_BLOCK_TARGET = 4_000_000


def _warn_arithmetic(which: list[int], family: str) -> None:
    if which:
        coords = ", ".join(str(i) for i in which)
        warnings.warn(
            f"{family}: cycle lengths of coordinate(s) {coords} are "
            f"arithmetic; the product-form limit requires nonarithmetic "
            f"cycles, treat results as a negative control",
            ArithmeticCyclesWarning, stacklevel=3)


# ---------------------------------------------------------------------------
# storage / queue with dependent restart levels


@dataclass(frozen=True)
class LevyQueueCoordinate:
    """One coordinate: drift -1, compound-Poisson jumps at ``jump_rate`` with
    sizes ``jump_size``, restarted at an extra jump of size ``restart_level``
    each time the path hits zero."""

    restart_level: MarginalSpec
    jump_rate: float = 0.0
    jump_size: MarginalSpec | None = None

    def validate(self) -> "LevyQueueCoordinate":
        if not (self.jump_rate >= 0.0 and math.isfinite(self.jump_rate)):
            raise ConfigurationError("jump_rate must be finite and >= 0")
        if self.jump_rate > 0.0:
            if self.jump_size is None:
                raise ConfigurationError(
                    "jump_size is required when jump_rate > 0")
            self.jump_size.validate()
        self.restart_level.validate()
        return self

    def load(self) -> float:
        if self.jump_rate == 0.0:
            return 0.0
        return self.jump_rate * self.jump_size.mean()


@dataclass(frozen=True)
class LevyQueueSpec:
    coordinates: tuple[LevyQueueCoordinate, ...]
    dependence: DependenceSpec = field(
        default_factory=DependenceSpec.independent)

    def validate(self) -> "LevyQueueSpec":
        if not self.coordinates:
            raise ConfigurationError("at least one coordinate is required")
        for k, coord in enumerate(self.coordinates):
            coord.validate()
            if coord.load() >= 1.0:
                raise ConfigurationError(
                    f"coordinate {k} is unstable: jump_rate * mean jump size "
                    f"= {coord.load():g} >= 1")
        self.dependence.validate(len(self.coordinates))
        return self


def _levy_cycle(coord: LevyQueueCoordinate, start_level: float,
                gen: np.random.Generator) -> CyclePath:
    breaks = [0.0]
    values = [start_level]
    level = start_level
    t = 0.0
    lam = coord.jump_rate
    for _ in range(MAX_EVENTS_PER_CYCLE):
        gap = gen.exponential(1.0 / lam) if lam > 0.0 else math.inf
        if gap >= level:
            breaks.append(t + level)
            k = len(values)
            return CyclePath(np.asarray(breaks),
                             np.asarray(values)[:, None],
                             np.full((k, 1), -1.0))
        t += gap
        level -= gap
        level += coord.jump_size.sample(gen)
        breaks.append(t)
        values.append(level)
    raise BudgetExceededError(
        f"storage cycle exceeded {MAX_EVENTS_PER_CYCLE} jumps")


def build_levy_queue(spec: LevyQueueSpec) -> RegenModel:
    spec.validate()
    coords = spec.coordinates
    dep = spec.dependence
    _warn_arithmetic(
        [i for i, c in enumerate(coords)
         if effective_arithmetic(dep, c.restart_level)
         and (c.jump_rate == 0.0 or c.jump_size.arithmetic)],
        "levy_queue")
    restarts = tuple(c.restart_level for c in coords)
    # each cycle is a busy period started by one restart jump: Wald gives
    # E T = E U / (1 - load)
    means = tuple(effective_cycle_mean(dep, c.restart_level)
                  / (1.0 - c.load()) for c in coords)

    def generate(gen: np.random.Generator) -> tuple[CyclePath, ...]:
        levels = sample_cycle_vector(dep, restarts, gen)
        return tuple(_levy_cycle(coords[i], float(levels[i]), gen)
                     for i in range(len(coords)))

    return RegenModel("levy_queue", len(coords), (1,) * len(coords),
                      means, generate)


# ---------------------------------------------------------------------------
# clearing processes


@dataclass(frozen=True)
class ClearingCoordinate:
    """Content grows at ``drift`` plus compound-Poisson jumps and is cleared
    to zero after ``cycle_length`` time units."""

    cycle_length: MarginalSpec
    drift: float = 1.0
    jump_rate: float = 0.0
    jump_size: MarginalSpec | None = None

    def validate(self) -> "ClearingCoordinate":
        if not (self.drift >= 0.0 and math.isfinite(self.drift)):
            raise ConfigurationError("drift must be finite and >= 0")
        if not (self.jump_rate >= 0.0 and math.isfinite(self.jump_rate)):
            raise ConfigurationError("jump_rate must be finite and >= 0")
        if self.jump_rate > 0.0:
            if self.jump_size is None:
                raise ConfigurationError(
                    "jump_size is required when jump_rate > 0")
            self.jump_size.validate()
        if self.drift == 0.0 and self.jump_rate == 0.0:
            raise ConfigurationError(
                "content must grow: need drift > 0 or jump_rate > 0")
        self.cycle_length.validate()
        return self


@dataclass(frozen=True)
class ClearingSpec:
    coordinates: tuple[ClearingCoordinate, ...]
    dependence: DependenceSpec = field(
        default_factory=DependenceSpec.independent)

    def validate(self) -> "ClearingSpec":
        if not self.coordinates:
            raise ConfigurationError("at least one coordinate is required")
        for coord in self.coordinates:
            coord.validate()
        self.dependence.validate(len(self.coordinates))
        return self


def _subordinator_cycle(coord: ClearingCoordinate, cycle_len: float,
                        gen: np.random.Generator) -> CyclePath:
    if coord.jump_rate > 0.0:
        k = int(gen.poisson(coord.jump_rate * cycle_len))
        times = np.sort(gen.uniform(0.0, cycle_len, k))
        jumps = np.atleast_1d(coord.jump_size.sample(gen, k))
    else:
        times = np.empty(0)
        jumps = np.empty(0)
    breaks = np.concatenate([[0.0], times, [cycle_len]])
    n_seg = len(breaks) - 1
    values = np.empty(n_seg)
    values[0] = 0.0
    for j in range(1, n_seg):
        values[j] = (values[j - 1]
                     + coord.drift * (breaks[j] - breaks[j - 1]) + jumps[j - 1])
    return CyclePath(breaks, values[:, None], np.full((n_seg, 1), coord.drift))


def _compound_total(rate: float, jump: MarginalSpec, durations: np.ndarray,
                    gen: np.random.Generator) -> np.ndarray:
    """Sum of a compound-Poisson process over each duration, one draw per
    entry, vectorised per jump-size family."""
    counts = gen.poisson(rate * durations)
    if jump.kind == "deterministic":
        return counts * jump.value
    if jump.kind == "exponential":
        return gen.standard_gamma(counts.astype(float)) / jump.rate
    if jump.kind == "gamma":
        return gen.standard_gamma(counts * jump.shape) / jump.rate
    total = np.zeros(len(durations))
    for k in range(int(counts.max()) if len(counts) else 0):
        draws = np.asarray(jump.sample(gen, len(durations)))
        total += np.where(k < counts, draws, 0.0)
    return total


def build_clearing(spec: ClearingSpec) -> RegenModel:
    spec.validate()
    coords = spec.coordinates
    dep = spec.dependence
    _warn_arithmetic(
        [i for i, c in enumerate(coords)
         if effective_arithmetic(dep, c.cycle_length)], "clearing")
    marginals = tuple(c.cycle_length for c in coords)
    means = tuple(effective_cycle_mean(dep, sp) for sp in marginals)

    def generate(gen: np.random.Generator) -> tuple[CyclePath, ...]:
        lens = sample_cycle_vector(dep, marginals, gen)
        return tuple(_subordinator_cycle(coords[i], float(lens[i]), gen)
                     for i in range(len(coords)))

    def state(i: int, age: np.ndarray, length: np.ndarray,
              gen: np.random.Generator) -> np.ndarray:
        coord = coords[i]
        out = coord.drift * age
        if coord.jump_rate > 0.0:
            out = out + _compound_total(coord.jump_rate, coord.jump_size,
                                        age, gen)
        return out[:, None]

    sampler = _renewal_state_sampler(dep, marginals, state, (1,) * len(coords))
    return RegenModel("clearing", len(coords), (1,) * len(coords),
                      means, generate, sampler)


# ---------------------------------------------------------------------------
# status updating


@dataclass(frozen=True)
class StatusSource:
    """A source updated at renewal times with i.i.d. marks; the state is
    (age, mark/capacity) and the source counts as updated while
    age > mark/capacity (strict)."""

    inter_update: MarginalSpec
    update_size: MarginalSpec
    capacity: float = 1.0

    def validate(self) -> "StatusSource":
        self.inter_update.validate()
        self.update_size.validate()
        if not (self.capacity > 0.0 and math.isfinite(self.capacity)):
            raise ConfigurationError("capacity must be positive and finite")
        return self


@dataclass(frozen=True)
class StatusSpec:
    sources: tuple[StatusSource, ...]
    dependence: DependenceSpec = field(
        default_factory=DependenceSpec.independent)

    def validate(self) -> "StatusSpec":
        if not self.sources:
            raise ConfigurationError("at least one source is required")
        for src in self.sources:
            src.validate()
        self.dependence.validate(len(self.sources))
        return self


def build_status(spec: StatusSpec) -> RegenModel:
    spec.validate()
    sources = spec.sources
    dep = spec.dependence
    _warn_arithmetic(
        [i for i, s in enumerate(sources)
         if effective_arithmetic(dep, s.inter_update)], "status")
    marginals = tuple(s.inter_update for s in sources)
    means = tuple(effective_cycle_mean(dep, sp) for sp in marginals)

    def generate(gen: np.random.Generator) -> tuple[CyclePath, ...]:
        lens = sample_cycle_vector(dep, marginals, gen)
        paths = []
        for i, src in enumerate(sources):
            hurdle = src.update_size.sample(gen) / src.capacity
            paths.append(linear_path((0.0, hurdle), (1.0, 0.0),
                                     float(lens[i])))
        return tuple(paths)

    def state(i: int, age: np.ndarray, length: np.ndarray,
              gen: np.random.Generator) -> np.ndarray:
        src = sources[i]
        marks = np.asarray(src.update_size.sample(gen, len(age)))
        return np.column_stack([age, marks / src.capacity])

    sampler = _renewal_state_sampler(dep, marginals, state,
                                     (2,) * len(sources))
    return RegenModel("status", len(sources), (2,) * len(sources),
                      means, generate, sampler)


def _effective_equilibrium_tail(dep: DependenceSpec, marginal: MarginalSpec,
                                x: float) -> float:
    """Equilibrium tail of one coordinate's effective cycle law."""
    if dep.kind != "common_shock":
        return float(equilibrium_tail(marginal, x))
    # T = Z + R: mean_T * tail_e(x) = E (T - x)^+ = E_Z[ m_R(x - Z) ]
    shock = dep.shock
    mean_t = shock.mean() + marginal.mean()

    def excess(w: float) -> float:
        if w <= 0.0:
            return marginal.mean() - w
        return float(mean_excess(marginal, w))

    if shock.is_discrete:
        val = sum(w * excess(x - z) for z, w in shock.atoms())
    else:
        f = lambda z: excess(x - z) * float(shock.pdf(z))
        hi = shock.support_upper()
        if 0.0 < x < hi:
            # the integrand changes form at z = x
            val = (integrate.quad(f, 0.0, x, epsabs=1e-10, limit=200)[0]
                   + integrate.quad(f, x, hi, epsabs=1e-10, limit=200)[0])
        else:
            val = integrate.quad(f, 0.0, hi, epsabs=1e-10, limit=200)[0]
    return min(max(val / mean_t, 0.0), 1.0)


def _expected_equilibrium_tail(dep: DependenceSpec, inter: MarginalSpec,
                               mark: MarginalSpec, capacity: float) -> float:
    tail = lambda x: _effective_equilibrium_tail(dep, inter, x)
    if mark.is_discrete:
        return sum(w * tail(v / capacity) for v, w in mark.atoms())
    hi = mark.support_upper()
    lo = mark.lo if mark.kind == "shifted_uniform" else 0.0
    val, _ = integrate.quad(lambda y: tail(y / capacity) * float(mark.pdf(y)),
                            lo, hi, epsabs=1e-8, limit=400)
    return min(max(val, 0.0), 1.0)


def pi_closed_form(spec: StatusSpec) -> float:
    """Limiting probability that all sources are simultaneously updated at
    well-separated times: the product over sources of
    ``E[ bar F_e(Y / capacity) ]``."""
    spec.validate()
    out = 1.0
    for src in spec.sources:
        out *= _expected_equilibrium_tail(spec.dependence, src.inter_update,
                                          src.update_size, src.capacity)
    return out


# ---------------------------------------------------------------------------
# age / residual observables of a plain renewal process


@dataclass(frozen=True)
class AgeResidualSpec:
    """``copies`` coordinates driven by one shared renewal sequence; the
    state is (age, residual)."""

    cycle_length: MarginalSpec
    copies: int = 2

    def validate(self) -> "AgeResidualSpec":
        self.cycle_length.validate()
        if self.copies < 1:
            raise ConfigurationError("copies must be >= 1")
        return self


def build_age_residual(spec: AgeResidualSpec) -> RegenModel:
    spec.validate()
    _warn_arithmetic([0] if spec.cycle_length.arithmetic else [],
                     "age_residual")
    m = spec.copies
    marginals = (spec.cycle_length,) * m
    dep = DependenceSpec.comonotone()

    def generate(gen: np.random.Generator) -> tuple[CyclePath, ...]:
        t_len = spec.cycle_length.sample(gen)
        path = linear_path((0.0, t_len), (1.0, -1.0), t_len)
        return (path,) * m

    def state(i: int, age: np.ndarray, length: np.ndarray,
              gen: np.random.Generator) -> np.ndarray:
        return np.column_stack([age, length - age])

    sampler = _renewal_state_sampler(dep, marginals, state, (2,) * m)
    return RegenModel("age_residual", m, (2,) * m,
                      (spec.cycle_length.mean(),) * m, generate, sampler)


# ---------------------------------------------------------------------------
# vectorised straddling-cycle machinery shared by the renewal-driven models


def _straddling_cycles(dep: DependenceSpec, marginals, taus: np.ndarray,
                       count: int, gen: np.random.Generator,
                       block: int) -> tuple[np.ndarray, np.ndarray]:
    """Ages and straddling-cycle lengths of each coordinate's renewal
    sequence at its own observation time, for ``count`` independent joint
    sequences."""
    m = len(marginals)
    lengths = sample_cycle_vectors(dep, marginals, gen,
                                   count * block).reshape(count, block, m)
    cum = np.cumsum(lengths, axis=1)
    ext = max(32, block // 8)
    while any((cum[:, -1, i] <= taus[i]).any() for i in range(m)):
        extra = sample_cycle_vectors(dep, marginals, gen,
                                     count * ext).reshape(count, ext, m)
        cum = np.concatenate([cum, cum[:, -1:, :] + np.cumsum(extra, axis=1)],
                             axis=1)
        lengths = np.concatenate([lengths, extra], axis=1)
    ages = np.empty((count, m))
    lens = np.empty((count, m))
    for i in range(m):
        ci = cum[:, :, i]
        n_i = (ci <= taus[i]).sum(axis=1)
        s_n = np.take_along_axis(ci, np.maximum(n_i - 1, 0)[:, None],
                                 axis=1)[:, 0]
        s_n = np.where(n_i > 0, s_n, 0.0)
        ages[:, i] = taus[i] - s_n
        lens[:, i] = np.take_along_axis(lengths[:, :, i], n_i[:, None],
                                        axis=1)[:, 0]
    return ages, lens


def _renewal_state_sampler(dep: DependenceSpec, marginals, state_fn,
                           state_dims: tuple[int, ...]):
    marginals = tuple(marginals)
    m = len(marginals)
    means = np.array([effective_cycle_mean(dep, sp) for sp in marginals])

    def sampler(times: np.ndarray, n: int, seed: int,
                base_key: tuple[int, ...], threads: int) -> list[np.ndarray]:
        taus = np.asarray(times, dtype=float)
        expected = float(np.max(taus / means))
        block = int(expected + 8.0 * math.sqrt(expected + 1.0) + 32.0)
        chunk = int(min(max(_BLOCK_TARGET // (block * m), 128), 8192))

        def work(start: int, count: int, k: int) -> list[np.ndarray]:
            gen = substream(seed, *base_key, k)
            ages, lens = _straddling_cycles(dep, marginals, taus, count,
                                            gen, block)
            return [state_fn(i, ages[:, i], lens[:, i], gen)
                    for i in range(m)]

        parts = run_chunked(n, chunk, work, threads)
        return [np.concatenate([p[i] for p in parts]) for i in range(m)]

    return sampler


# ---------------------------------------------------------------------------
# Jackson networks


@dataclass(frozen=True)
class JacksonSpec:
    """Open Jackson network with Poisson external arrivals, exponential
    single servers, and Markovian routing; row deficits of ``routing`` are
    exit probabilities. Coordinate ``i`` observes the queue length at
    station ``i``."""

    arrival_rates: tuple[float, ...]
    service_rates: tuple[float, ...]
    routing: tuple[tuple[float, ...], ...]

    def validate(self) -> "JacksonSpec":
        m = len(self.arrival_rates)
        if m < 1:
            raise ConfigurationError("at least one station is required")
        if len(self.service_rates) != m or len(self.routing) != m:
            raise ConfigurationError(
                "arrival_rates, service_rates, and routing disagree on the "
                "number of stations")
        for j, a in enumerate(self.arrival_rates):
            if not (a >= 0.0 and math.isfinite(a)):
                raise ConfigurationError(
                    f"arrival rate of station {j} must be finite and >= 0")
        for j, s in enumerate(self.service_rates):
            if not (s > 0.0 and math.isfinite(s)):
                raise ConfigurationError(
                    f"service rate of station {j} must be positive")
        for j, row in enumerate(self.routing):
            if len(row) != m:
                raise ConfigurationError(f"routing row {j} has wrong length")
            if any(not (0.0 <= p <= 1.0) for p in row):
                raise ConfigurationError(
                    f"routing row {j} must have entries in [0, 1]")
            if sum(row) > 1.0 + 1e-12:
                raise ConfigurationError(
                    f"routing row {j} sums to more than 1")
        if sum(self.arrival_rates) <= 0.0:
            raise ConfigurationError(
                "total external arrival rate must be positive; an empty "
                "network never regenerates through work")
        mat = np.asarray(self.routing, dtype=float)
        if len(mat) and np.abs(np.linalg.eigvals(mat)).max() >= 1.0 - 1e-12:
            raise ConfigurationError(
                "routing matrix must have spectral radius < 1 so every "
                "customer eventually leaves")
        lam = traffic_solve(self)
        for j in range(m):
            if lam[j] >= self.service_rates[j]:
                raise ConfigurationError(
                    f"station {j} is unstable: effective arrival rate "
                    f"{lam[j]:g} >= service rate {self.service_rates[j]:g}")
        return self


def traffic_solve(spec: JacksonSpec) -> np.ndarray:
    """Effective arrival rates: the solution of the traffic equations
    ``lam = a + P^T lam``."""
    mat = np.asarray(spec.routing, dtype=float)
    a = np.asarray(spec.arrival_rates, dtype=float)
    try:
        lam = np.linalg.solve(np.eye(len(a)) - mat.T, a)
    except np.linalg.LinAlgError as exc:
        raise ConfigurationError(f"traffic equations are singular: {exc}")
    return lam


def jackson_utilizations(spec: JacksonSpec) -> np.ndarray:
    return traffic_solve(spec) / np.asarray(spec.service_rates, dtype=float)


def jackson_cycle_mean(spec: JacksonSpec) -> float:
    """Mean time between empty-system regenerations: by the renewal-reward
    identity applied to the empty state, ``1 / (total arrivals * P(empty))``
    with the product-form ``P(empty) = prod (1 - rho_j)``."""
    rho = jackson_utilizations(spec)
    return 1.0 / (sum(spec.arrival_rates) * float(np.prod(1.0 - rho)))


def _jackson_cycle(spec: JacksonSpec, gen: np.random.Generator
                   ) -> tuple[CyclePath, ...]:
    m = len(spec.arrival_rates)
    arrivals = np.asarray(spec.arrival_rates, dtype=float)
    services = np.asarray(spec.service_rates, dtype=float)
    routing = np.asarray(spec.routing, dtype=float)
    lam_ext = float(arrivals.sum())
    arr_cuts = np.cumsum(arrivals) / lam_ext
    route_cuts = np.cumsum(routing, axis=1)

    times = [0.0]
    rows = []
    x = np.zeros(m, dtype=np.int64)
    # idle stretch until the first external arrival
    rows.append(x.copy())
    t = gen.exponential(1.0 / lam_ext)
    times.append(t)
    x[int(np.searchsorted(arr_cuts, gen.random(), side="right"))] += 1
    while x.any():
        if len(times) > MAX_EVENTS_PER_CYCLE:
            raise BudgetExceededError(
                f"network cycle exceeded {MAX_EVENTS_PER_CYCLE} events")
        rows.append(x.copy())
        busy = x > 0
        rate = lam_ext + float(services[busy].sum())
        t += gen.exponential(1.0 / rate)
        u = gen.random() * rate
        if u < lam_ext:
            x[int(np.searchsorted(arr_cuts * lam_ext, u, side="right"))] += 1
        else:
            u -= lam_ext
            cuts = np.cumsum(services * busy)
            j = int(np.searchsorted(cuts, u, side="right"))
            j = min(j, m - 1)
            x[j] -= 1
            v = gen.random()
            k = int(np.searchsorted(route_cuts[j], v, side="right"))
            if k < m:
                x[k] += 1
        times.append(t)
    breaks = np.asarray(times)
    states = np.asarray(rows, dtype=float)
    zero = np.zeros((len(rows), 1))
    return tuple(CyclePath(breaks, states[:, i:i + 1], zero)
                 for i in range(m))


def _make_jackson_sampler(spec: JacksonSpec):
    m = len(spec.arrival_rates)
    arrivals = np.asarray(spec.arrival_rates, dtype=float)
    services = np.asarray(spec.service_rates, dtype=float)
    routing = np.asarray(spec.routing, dtype=float)
    # uniformisation: one exponential clock at the total rate, with fixed
    # event categories; service events at empty stations are self-loops
    cats: list[tuple[str, int, int]] = []
    probs: list[float] = []
    for j in range(m):
        if arrivals[j] > 0.0:
            cats.append(("arrive", j, -1))
            probs.append(float(arrivals[j]))
    for j in range(m):
        exit_p = 1.0 - float(routing[j].sum())
        for k in range(m):
            if routing[j, k] > 0.0:
                cats.append(("move", j, k))
                probs.append(float(services[j] * routing[j, k]))
        if exit_p > 0.0:
            cats.append(("exit", j, -1))
            probs.append(float(services[j] * exit_p))
    total = float(arrivals.sum() + services.sum())
    cuts = np.cumsum(probs) / total

    def chunk_states(gen: np.random.Generator, count: int,
                     taus: np.ndarray) -> list[np.ndarray]:
        t = np.zeros(count)
        x = np.zeros((count, m), dtype=np.int64)
        out = [np.full(count, -1, dtype=np.int64) for _ in range(len(taus))]
        tau_max = float(taus.max())
        active = np.ones(count, dtype=bool)
        while active.any():
            t_new = t + gen.exponential(1.0 / total, count)
            u = gen.random(count)
            for i in range(len(taus)):
                rec = active & (t <= taus[i]) & (taus[i] < t_new)
                if rec.any():
                    out[i][rec] = x[rec, i]
            step = active & (t_new <= tau_max)
            if step.any():
                cat = np.minimum(np.searchsorted(cuts, u, side="right"),
                                 len(cats) - 1)
                for c, (kind, j, k) in enumerate(cats):
                    mask = step & (cat == c)
                    if not mask.any():
                        continue
                    if kind == "arrive":
                        x[mask, j] += 1
                    else:
                        busy = mask & (x[:, j] > 0)
                        x[busy, j] -= 1
                        if kind == "move":
                            x[busy, k] += 1
            t = np.where(active, t_new, t)
            active &= t <= tau_max
        return [o[:, None].astype(float) for o in out]

    def sampler(times: np.ndarray, n: int, seed: int,
                base_key: tuple[int, ...], threads: int) -> list[np.ndarray]:
        taus = np.asarray(times, dtype=float)
        chunk = 16384

        def work(start: int, count: int, k: int) -> list[np.ndarray]:
            gen = substream(seed, *base_key, k)
            return chunk_states(gen, count, taus)

        parts = run_chunked(n, chunk, work, threads)
        return [np.concatenate([p[i] for p in parts]) for i in range(m)]

    return sampler


def build_jackson(spec: JacksonSpec) -> RegenModel:
    spec.validate()
    m = len(spec.arrival_rates)
    mean = jackson_cycle_mean(spec)

    def generate(gen: np.random.Generator) -> tuple[CyclePath, ...]:
        return _jackson_cycle(spec, gen)

    return RegenModel("jackson", m, (1,) * m, (mean,) * m, generate,
                      _make_jackson_sampler(spec))


# ---------------------------------------------------------------------------


ModelSpec = (LevyQueueSpec | ClearingSpec | StatusSpec | JacksonSpec
             | AgeResidualSpec)


def build_model(spec) -> RegenModel:
    if isinstance(spec, LevyQueueSpec):
        return build_levy_queue(spec)
    if isinstance(spec, ClearingSpec):
        return build_clearing(spec)
    if isinstance(spec, StatusSpec):
        return build_status(spec)
    if isinstance(spec, JacksonSpec):
        return build_jackson(spec)
    if isinstance(spec, AgeResidualSpec):
        return build_age_residual(spec)
    raise ConfigurationError(f"unknown model spec {type(spec).__name__}")
