"""Queueing-network simulator and its online-round adapter.

The statistical checks here average a handful of seeded windows and assert
coarse directional facts (more capacity means less waiting, the bottleneck
dominates); the M/M/1 calibration against closed-form values lives in the
acceptance suite.
"""

import numpy as np
import pytest

from congo.core import ConfigurationError
from congo.env_jackson import (
    FixedWorkload,
    JacksonEnvironment,
    SimConfig,
    Topology,
    VariableMixWorkload,
    VariableRateWorkload,
    apply_instability_correction,
    latency_oracle,
    round_cost,
    simulate_window,
)

TANDEM = Topology(num_queues=2, routes={"job1": (0, 1)})
SINGLE = Topology(num_queues=1, routes={"job1": (0,)})
ONE_JOB = {"job1": 1.0}


def quick_cfg(**kw):
    base = dict(warmup_seconds=2.0, measure_seconds=4.0)
    base.update(kw)
    return SimConfig(**base)


def test_topology_validation():
    with pytest.raises(ConfigurationError):
        Topology(num_queues=0, routes={"a": (0,)})
    with pytest.raises(ConfigurationError):
        Topology(num_queues=2, routes={})
    with pytest.raises(ConfigurationError):
        Topology(num_queues=2, routes={"a": ()})
    with pytest.raises(ConfigurationError):
        Topology(num_queues=2, routes={"a": (1,)})  # must start at the entry
    with pytest.raises(ConfigurationError):
        Topology(num_queues=2, routes={"a": (0, 5)})
    with pytest.raises(ConfigurationError):
        Topology(num_queues=2, routes={"a": (0, 1)}, entry=7)
    topo = Topology(num_queues=3, routes={"a": (0, 2), "b": (0,)})
    assert topo.job_names == ("a", "b")


def test_workload_schedules():
    fixed = FixedWorkload(rate=2.0, mix=ONE_JOB)
    assert fixed.at(1) == (2.0, ONE_JOB)
    assert fixed.at(99) == (2.0, ONE_JOB)

    varying = VariableRateWorkload(
        segments=((1, 10, 2.0), (11, 20, 3.0)), mix=ONE_JOB
    )
    assert varying.at(5)[0] == 2.0
    assert varying.at(11)[0] == 3.0
    assert varying.at(50)[0] == 3.0  # past the last segment: hold the last rate
    with pytest.raises(ConfigurationError):
        VariableRateWorkload(segments=(), mix=ONE_JOB)

    drift = VariableMixWorkload(
        rate=1.0,
        initial_mix={"a": 1.0},
        final_mix={"b": 1.0},
        start_round=10,
        end_round=20,
    )
    assert drift.at(5)[1] == {"a": 1.0, "b": 0.0}
    assert drift.at(15)[1] == {"a": 0.5, "b": 0.5}
    assert drift.at(99)[1] == {"a": 0.0, "b": 1.0}
    with pytest.raises(ConfigurationError):
        VariableMixWorkload(rate=1.0, initial_mix={}, final_mix={}, start_round=5, end_round=5)


def test_sim_config_validation():
    with pytest.raises(ConfigurationError):
        SimConfig(measure_seconds=0.0)
    with pytest.raises(ConfigurationError):
        SimConfig(warmup_seconds=-1.0)
    with pytest.raises(ConfigurationError):
        SimConfig(lower_bound=5.0, upper_bound=1.0)


def test_simulate_window_argument_errors():
    cfg = quick_cfg()
    rng = np.random.default_rng(0)
    with pytest.raises(ConfigurationError):
        simulate_window(SINGLE, 0.0, ONE_JOB, np.array([1.0]), cfg, rng)
    with pytest.raises(ConfigurationError):
        simulate_window(SINGLE, 1.0, ONE_JOB, np.array([1.0, 2.0]), cfg, rng)
    with pytest.raises(ConfigurationError):
        simulate_window(SINGLE, 1.0, ONE_JOB, np.array([np.inf]), cfg, rng)
    with pytest.raises(ConfigurationError):
        simulate_window(SINGLE, 1.0, {"job1": 0.5}, np.array([1.0]), cfg, rng)
    with pytest.raises(ConfigurationError):
        simulate_window(SINGLE, 1.0, {"ghost": 1.0}, np.array([1.0]), cfg, rng)


def test_simulate_window_is_deterministic_per_rng_state():
    obs1 = simulate_window(
        TANDEM, 2.0, ONE_JOB, np.array([3.0, 3.0]), quick_cfg(), np.random.default_rng(42)
    )
    obs2 = simulate_window(
        TANDEM, 2.0, ONE_JOB, np.array([3.0, 3.0]), quick_cfg(), np.random.default_rng(42)
    )
    assert obs1.mean_latency == obs2.mean_latency
    assert obs1.departures == obs2.departures
    assert not obs1.unstable


def test_more_capacity_means_less_waiting():
    cfg = quick_cfg(warmup_seconds=5.0, measure_seconds=20.0)
    slow, fast = [], []
    for seed in range(8):
        slow.append(
            simulate_window(SINGLE, 2.0, ONE_JOB, np.array([2.4]), cfg,
                            np.random.default_rng(seed)).mean_latency
        )
        fast.append(
            simulate_window(SINGLE, 2.0, ONE_JOB, np.array([7.9]), cfg,
                            np.random.default_rng(seed)).mean_latency
        )
    assert np.mean(fast) < np.mean(slow)


def test_bottleneck_queue_dominates_latency():
    """A starved middle queue should blow the end-to-end latency up several-fold."""
    cfg = quick_cfg(warmup_seconds=5.0, measure_seconds=20.0)
    balanced, choked = [], []
    for seed in range(8):
        balanced.append(
            simulate_window(TANDEM, 1.0, ONE_JOB, np.array([4.9, 4.9]), cfg,
                            np.random.default_rng(seed)).mean_latency
        )
        choked.append(
            simulate_window(TANDEM, 1.0, ONE_JOB, np.array([4.9, 1.0]), cfg,
                            np.random.default_rng(seed)).mean_latency
        )
    assert np.mean(choked) >= 3.0 * np.mean(balanced)


def test_empty_window_is_unstable():
    # arrival rate so small that the window almost surely sees no departures
    obs = simulate_window(
        SINGLE, 1e-9, ONE_JOB, np.array([1.0]), quick_cfg(), np.random.default_rng(0)
    )
    assert obs.unstable
    assert np.isnan(obs.mean_latency)


def test_reentrant_route_completes():
    looped = Topology(num_queues=2, routes={"job1": (0, 1, 0)})
    obs = simulate_window(
        looped, 1.0, ONE_JOB, np.array([5.0, 5.0]),
        quick_cfg(warmup_seconds=5.0, measure_seconds=20.0), np.random.default_rng(3)
    )
    assert obs.departures > 0
    # three service visits at mu ~5 sit well above two but below heavy queueing
    assert obs.mean_latency > 2.0 / 5.1


def test_round_cost_and_correction():
    from congo.env_jackson import LatencyObservation

    stable = LatencyObservation(mean_latency=1.5, departures=10)
    assert round_cost(stable, np.array([2.0, 3.0]), weight=0.5) == pytest.approx(1.5 + 2.5)
    unstable = LatencyObservation(mean_latency=float("nan"), departures=0)
    assert np.isnan(round_cost(unstable, np.array([2.0]), weight=1.0))

    from congo.core import Box

    box = Box(lower=np.zeros(2), upper=np.full(2, 5.0))
    bumped = apply_instability_correction(np.array([4.5, 1.0]), 1.0, box)
    assert np.allclose(bumped, [5.0, 2.0])


def test_latency_oracle_windows_are_independent():
    rng = np.random.default_rng(1)
    oracle = latency_oracle(SINGLE, 2.0, ONE_JOB, quick_cfg(), rng)
    x = np.array([4.0])
    first, second = oracle(x), oracle(x)
    assert oracle.queries == 2
    assert first != second  # fresh window per query, no common-random-numbers reuse


def test_environment_round_protocol():
    schedule = FixedWorkload(rate=2.0, mix=ONE_JOB)
    env = JacksonEnvironment(TANDEM, schedule, quick_cfg(), np.array([4.0, 4.0]))
    assert env.dim == 2
    start = env.reset(0)
    assert np.array_equal(start, [4.0, 4.0])
    start[0] = -99.0  # caller-side mutation must not leak into the env
    again = env.reset(0)
    assert np.array_equal(again, [4.0, 4.0])

    env.begin_round(1)
    cost = env.incur(np.array([4.0, 4.0]))
    assert np.isfinite(cost)
    assert cost > 8.0  # resource term alone is 8
    assert np.array_equal(env.gradient_offset(), [1.0, 1.0])
    assert env.exact_gradient(np.array([4.0, 4.0])) is None
    corrected = env.instability_correction(np.array([59.5, 4.0]))
    assert np.allclose(corrected, [60.0, 5.0])


def test_environment_initial_allocation_is_projected():
    schedule = FixedWorkload(rate=1.0, mix=ONE_JOB)
    env = JacksonEnvironment(TANDEM, schedule, quick_cfg(), np.array([0.0, 99.0]))
    start = env.reset(0)
    assert np.array_equal(start, [1.0, 60.0])
    with pytest.raises(ConfigurationError):
        JacksonEnvironment(TANDEM, schedule, quick_cfg(), np.array([1.0]))


def test_environment_runs_are_reproducible():
    schedule = FixedWorkload(rate=2.0, mix=ONE_JOB)
    costs = []
    for _ in range(2):
        env = JacksonEnvironment(SINGLE, schedule, quick_cfg(), np.array([3.0]))
        env.reset(7)
        env.begin_round(1)
        costs.append(env.incur(np.array([3.0])))
    assert costs[0] == costs[1]
