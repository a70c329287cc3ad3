"""Queueing-network environment: typed jobs over FIFO exponential-server queues.

Jobs arrive in a Poisson stream, draw a type from the round's mix, and follow
that type's fixed route of queues (all routes share one entry queue). Queue i
serves at rate allocation_i + 0.1. A cost query simulates one fresh window
(warm-up then measurement) and reports the mean end-to-end latency of jobs
that left the system during the measurement span; the linear resource cost is
known analytically and never sampled.
"""

from __future__ import annotations

import heapq
import math
from collections import deque
from dataclasses import dataclass

import numpy as np

from .core import Box, ConfigurationError
from .sensing import ValueOracle

SERVICE_RATE_FLOOR = 0.1

_SIM_STREAM = 1


@dataclass(frozen=True)
class Topology:
    """Queue count plus one fixed route per job type; routes start at the entry."""

    num_queues: int
    routes: dict[str, tuple[int, ...]]
    entry: int = 0

    def __post_init__(self):
        if self.num_queues < 1:
            raise ConfigurationError("need at least one queue")
        if not self.routes:
            raise ConfigurationError("need at least one job type")
        if not 0 <= self.entry < self.num_queues:
            raise ConfigurationError(f"entry index {self.entry} out of range")
        clean = {}
        for name, route in self.routes.items():
            route = tuple(int(q) for q in route)
            if not route:
                raise ConfigurationError(f"route {name!r} is empty")
            if route[0] != self.entry:
                raise ConfigurationError(f"route {name!r} does not start at the entry queue")
            if any(q < 0 or q >= self.num_queues for q in route):
                raise ConfigurationError(f"route {name!r} has queue index out of range")
            clean[str(name)] = route
        object.__setattr__(self, "routes", clean)

    @property
    def job_names(self) -> tuple[str, ...]:
        return tuple(self.routes)


def _check_mix(mix: dict[str, float], names: tuple[str, ...]):
    total = 0.0
    for name, prob in mix.items():
        if name not in names:
            raise ConfigurationError(f"mix references unknown job type {name!r}")
        if prob < 0:
            raise ConfigurationError(f"mix probability for {name!r} is negative")
        total += prob
    if abs(total - 1.0) > 1e-9:
        raise ConfigurationError(f"mix probabilities sum to {total}, expected 1")


@dataclass(frozen=True)
class FixedWorkload:
    rate: float
    mix: dict[str, float]

    def at(self, t: int) -> tuple[float, dict[str, float]]:
        return self.rate, self.mix


@dataclass(frozen=True)
class VariableRateWorkload:
    """Piecewise-constant arrival rate: segments of (first_round, last_round, rate)."""

    segments: tuple[tuple[int, int, float], ...]
    mix: dict[str, float]

    def __post_init__(self):
        if not self.segments:
            raise ConfigurationError("need at least one rate segment")

    def at(self, t: int) -> tuple[float, dict[str, float]]:
        for first, last, rate in self.segments:
            if first <= t <= last:
                return rate, self.mix
        return self.segments[-1][2], self.mix


@dataclass(frozen=True)
class VariableMixWorkload:
    """Linear drift from initial_mix to final_mix across [start_round, end_round]."""

    rate: float
    initial_mix: dict[str, float]
    final_mix: dict[str, float]
    start_round: int
    end_round: int

    def __post_init__(self):
        if self.end_round <= self.start_round:
            raise ConfigurationError("mix transition needs end_round > start_round")

    def at(self, t: int) -> tuple[float, dict[str, float]]:
        span = self.end_round - self.start_round
        frac = min(1.0, max(0.0, (t - self.start_round) / span))
        keys = dict.fromkeys(list(self.initial_mix) + list(self.final_mix))
        mix = {
            k: (1.0 - frac) * self.initial_mix.get(k, 0.0) + frac * self.final_mix.get(k, 0.0)
            for k in keys
        }
        return self.rate, mix


@dataclass(frozen=True)
class SimConfig:
    warmup_seconds: float = 30.0
    measure_seconds: float = 10.0
    resource_weight: float = 1.0
    correction_factor: float = 1.0
    lower_bound: float = 1.0
    upper_bound: float = 60.0

    def __post_init__(self):
        if self.warmup_seconds < 0 or self.measure_seconds <= 0:
            raise ConfigurationError("warm-up must be >= 0 and measurement span > 0")
        if self.lower_bound > self.upper_bound:
            raise ConfigurationError("allocation lower bound exceeds upper bound")


@dataclass(frozen=True)
class LatencyObservation:
    mean_latency: float
    departures: int

    @property
    def unstable(self) -> bool:
        return self.departures == 0


def simulate_window(
    topology: Topology,
    rate: float,
    mix: dict[str, float],
    allocation: np.ndarray,
    sim_cfg: SimConfig,
    rng: np.random.Generator,
) -> LatencyObservation:
    """Run one fresh window and summarize departures inside the measurement span.

    The network starts empty, warms up for warmup_seconds, then every job that
    completes its full route during the next measure_seconds contributes its
    end-to-end sojourn. Zero such departures marks the window unstable.
    """
    if rate <= 0 or not math.isfinite(rate):
        raise ConfigurationError(f"arrival rate must be finite and > 0, got {rate}")
    allocation = np.asarray(allocation, dtype=float)
    if allocation.shape != (topology.num_queues,):
        raise ConfigurationError(
            f"allocation has shape {allocation.shape}, expected ({topology.num_queues},)"
        )
    if not np.all(np.isfinite(allocation)):
        raise ConfigurationError("allocation must be finite")
    names = topology.job_names
    _check_mix(mix, names)
    service_rate = np.maximum(allocation, 0.0) + SERVICE_RATE_FLOOR
    mean_service = 1.0 / service_rate
    horizon = sim_cfg.warmup_seconds + sim_cfg.measure_seconds

    arrivals = _poisson_arrivals(rate, horizon, rng)
    n = arrivals.shape[0]
    if n == 0:
        return LatencyObservation(mean_latency=float("nan"), departures=0)
    probs = np.array([mix.get(name, 0.0) for name in names])
    routes = [topology.routes[name] for name in names]
    job_type = rng.choice(len(names), size=n, p=probs)

    stage = np.zeros(n, dtype=np.int64)
    waiting = [deque() for _ in range(topology.num_queues)]
    in_service = [-1] * topology.num_queues
    heap: list[tuple[float, int, int]] = []
    seq = 0
    next_arrival = 0
    measure_start = sim_cfg.warmup_seconds
    total_sojourn = 0.0
    departures = 0
    exponential = rng.exponential

    def begin_service(queue: int, job: int, now: float):
        nonlocal seq
        in_service[queue] = job
        seq += 1
        heapq.heappush(heap, (now + exponential(mean_service[queue]), seq, queue))

    def enqueue(queue: int, job: int, now: float):
        if in_service[queue] < 0:
            begin_service(queue, job, now)
        else:
            waiting[queue].append(job)

    while True:
        arrival_time = arrivals[next_arrival] if next_arrival < n else math.inf
        completion_time = heap[0][0] if heap else math.inf
        if min(arrival_time, completion_time) > horizon:
            break
        if arrival_time <= completion_time:  # ties: arrivals join before services finish
            job = next_arrival
            next_arrival += 1
            enqueue(topology.entry, job, arrival_time)
        else:
            now, _, queue = heapq.heappop(heap)
            job = in_service[queue]
            in_service[queue] = -1
            stage[job] += 1
            route = routes[job_type[job]]
            if stage[job] == len(route):
                if now >= measure_start:
                    total_sojourn += now - arrivals[job]
                    departures += 1
            else:
                enqueue(route[stage[job]], job, now)
            if waiting[queue]:
                begin_service(queue, waiting[queue].popleft(), now)

    if departures == 0:
        return LatencyObservation(mean_latency=float("nan"), departures=0)
    return LatencyObservation(mean_latency=total_sojourn / departures, departures=departures)


def _poisson_arrivals(rate: float, horizon: float, rng: np.random.Generator) -> np.ndarray:
    chunk = max(16, int(rate * horizon * 1.25) + 16)
    pieces = []
    start = 0.0
    while True:
        cum = start + np.cumsum(rng.exponential(1.0 / rate, size=chunk))
        inside = cum < horizon
        pieces.append(cum[inside])
        if not bool(inside.all()):
            return np.concatenate(pieces)
        start = float(cum[-1])


def round_cost(observation: LatencyObservation, allocation: np.ndarray, weight: float) -> float:
    """Mean latency plus weight * total allocation; NaN for unstable windows."""
    if observation.unstable:
        return float("nan")
    return observation.mean_latency + weight * float(np.sum(allocation))


def apply_instability_correction(
    allocation: np.ndarray, factor: float, box: Box
) -> np.ndarray:
    """Bump every queue's allocation by factor, then project back into the box."""
    return box.project(np.asarray(allocation, dtype=float) + factor)


def latency_oracle(
    topology: Topology,
    rate: float,
    mix: dict[str, float],
    sim_cfg: SimConfig,
    rng: np.random.Generator,
) -> ValueOracle:
    """Oracle over allocations: each query burns one full window, returns latency only.

    The resource term weight * sum(x) is linear with known gradient, so
    optimizers receive it separately instead of estimating it from samples.

    Every query runs an independent window (the shared rng advances), so two
    queries of the same allocation return different values. Finite differences
    therefore carry full window-to-window noise; that per-query noise level is
    exactly what the estimator comparison is about.
    """

    def query(allocation: np.ndarray) -> float:
        obs = simulate_window(topology, rate, mix, allocation, sim_cfg, rng)
        return obs.mean_latency

    return ValueOracle(query)


class JacksonEnvironment:
    """Adapter exposing the queueing network through the online-round protocol."""

    def __init__(
        self,
        topology: Topology,
        schedule,
        sim_cfg: SimConfig,
        initial_allocation: np.ndarray,
    ):
        self.topology = topology
        self.schedule = schedule
        self.sim_cfg = sim_cfg
        self.constraint_set = Box(
            lower=np.full(topology.num_queues, sim_cfg.lower_bound),
            upper=np.full(topology.num_queues, sim_cfg.upper_bound),
        )
        initial = np.asarray(initial_allocation, dtype=float)
        if initial.shape != (topology.num_queues,):
            raise ConfigurationError("initial allocation length does not match queue count")
        self._initial = self.constraint_set.project(initial)
        self._rng: np.random.Generator | None = None
        self._rate = 0.0
        self._mix: dict[str, float] = {}

    @property
    def dim(self) -> int:
        return self.topology.num_queues

    def reset(self, seed: int) -> np.ndarray:
        self._rng = np.random.default_rng([seed, _SIM_STREAM])
        return self._initial.copy()

    def begin_round(self, t: int) -> None:
        self._rate, self._mix = self.schedule.at(t)

    def incur(self, x: np.ndarray) -> float:
        obs = simulate_window(self.topology, self._rate, self._mix, x, self.sim_cfg, self._rng)
        return round_cost(obs, x, self.sim_cfg.resource_weight)

    def oracle(self) -> ValueOracle:
        return latency_oracle(self.topology, self._rate, self._mix, self.sim_cfg, self._rng)

    def gradient_offset(self) -> np.ndarray:
        return np.full(self.dim, self.sim_cfg.resource_weight)

    def exact_gradient(self, x: np.ndarray) -> None:
        return None

    def instability_correction(self, x: np.ndarray) -> np.ndarray:
        return apply_instability_correction(x, self.sim_cfg.correction_factor, self.constraint_set)
