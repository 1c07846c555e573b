import math
from dataclasses import replace
import numpy as np
import pytest
from scipy import stats
from DT_VEC.config import SimConfig
from DT_VEC.env.mobility import VehicleState, init_scenario, advance_position, lane_offset
from DT_VEC.env.channel import (update_small_scale, channel_gain, large_scale_fading, reference_gain,
                                uplink_rate)
from DT_VEC.env.workload import WorkloadPair, sample_workloads, twin_delay, task_delay, satisfaction, utility
from DT_VEC.env.core import (Allocation, ConstraintReport, Environment, check_and_project, discounted_return,
                             reward, step, outcome_rows)
from DT_VEC.agents import action_to_allocation
from DT_VEC.metadata.mapping import TRAJECTORY_COLUMNS

WORKLOAD_1500 = WorkloadPair(twin_bytes=1500.0, twin_cycles_per_byte=0.25e6, twin_deadline_s=0.5,
                             task_bytes=1500.0, task_cycles_per_byte=0.25e6, task_deadline_s=0.5)

ALL_OK = ConstraintReport(twin_deadline_ok=True, task_deadline_ok=True, budget_ok=True, power_ok=True,
                          scale_applied=1.0)


########################################################################################################################
# mobility

def test_init_scenario_lanes_and_count():
    config = SimConfig(n_vehicles=5, vehicle_density_per_m=0.01)
    vehicles = init_scenario(config, 42)
    assert len(vehicles) == 5
    assert [v.id for v in vehicles] == list(range(5))
    for v in vehicles:
        assert v.y_m in {10.0, 14.0, 18.0}
        assert v.y_m == lane_offset(config, v.lane_j)
        assert 10 <= v.speed_mps <= 15
        assert -250 <= v.x_m <= 250
        assert v.h_complex == 1 + 0j
    assert [v.x_m for v in vehicles] == sorted(v.x_m for v in vehicles)


def test_init_scenario_is_deterministic():
    config = SimConfig()
    assert init_scenario(config, 7) == init_scenario(config, 7)
    assert init_scenario(config, 7) != init_scenario(config, 8)


def test_init_scenario_rejects_empty_fleet():
    with pytest.raises(ValueError, match='n_vehicles'):
        init_scenario(SimConfig(n_vehicles=0), 1)


def test_nearest_vehicle_distance_distribution():
    # For N = 1 the kept point is the one nearest to the base station. With Poisson(lam) candidates
    # conditioned on at least one point, P(|x| <= r) = (1 - exp(-lam * r / R)) / (1 - exp(-lam)).
    config = SimConfig(n_vehicles=1, vehicle_density_per_m=0.01)
    half = config.road_half_len_m
    lam = 2 * half * config.vehicle_density_per_m
    samples = np.array([abs(init_scenario(config, seed)[0].x_m) for seed in range(10000)])

    def cdf(r):
        return (1 - np.exp(-lam * np.asarray(r) / half)) / (1 - np.exp(-lam))
    assert stats.kstest(samples, cdf).pvalue > 1e-3


def test_speeds_and_lanes_are_uniform():
    config = SimConfig(n_vehicles=3)
    vehicles = [v for seed in range(3000) for v in init_scenario(config, seed)]
    low, high = config.speed_range_mps
    assert stats.kstest([v.speed_mps for v in vehicles], stats.uniform(loc=low, scale=high - low).cdf).pvalue > 1e-3
    lanes = np.bincount([v.lane_j for v in vehicles], minlength=config.n_lanes)
    assert stats.chisquare(lanes).pvalue > 1e-3


def test_advance_position():
    v = VehicleState(id=0, lane_j=1, x_m=0.0, y_m=14.0, speed_mps=10.0)
    moved = advance_position(v, 0.1)
    assert moved.x_m == pytest.approx(1.0)
    assert (moved.y_m, moved.lane_j) == (14.0, 1)

    v = VehicleState(id=0, lane_j=0, x_m=100.0, y_m=10.0, speed_mps=15.0)
    for _ in range(100):
        v = advance_position(v, 0.1)
    assert v.x_m == pytest.approx(250.0, rel=1e-12)

    with pytest.raises(ValueError):
        advance_position(v, 0.0)


########################################################################################################################
# channel

def test_update_small_scale():
    assert update_small_scale(5 - 2j, (1.0, 0.0, 0.0), (0.0, 0.0, 0.0), 0.0, 3.0) == 1 + 0j
    h = update_small_scale(1 + 0j, (100.0, 0.0, 0.0), (0.0, 0.0, 0.0), 0.2, 3.0)
    assert h.real == pytest.approx(0.200001, rel=1e-12)
    assert h.imag == 0
    h = update_small_scale(0.3 + 0.4j, (1e9, 0.0, 0.0), (0.0, 0.0, 0.0), 1.0, 3.0)
    assert h == pytest.approx(0.3 + 0.4j, abs=1e-20)
    with pytest.raises(ValueError, match='singular'):
        update_small_scale(1 + 0j, (0.0, 0.0, 10.0), (0.0, 0.0, 10.0), 0.2, 3.0)


def test_fading_innovation_statistics():
    rng = np.random.default_rng(3)
    kappa = 0.2
    h = np.array([update_small_scale(0j, (100.0, 0.0, 0.0), (0.0, 0.0, 0.0), kappa, 3.0, rng=rng)
                  for _ in range(20000)])
    assert np.mean(h).real == pytest.approx(1e-6, abs=0.03)
    assert np.var(h) == pytest.approx(1 - kappa ** 2, rel=0.05)


def test_channel_gain():
    assert channel_gain(3 + 4j, 2.0) == pytest.approx(50.0)
    assert channel_gain(0j, 5.0) == 0
    assert channel_gain(0.200001 + 0j, 1.0) == pytest.approx(0.0400004, rel=1e-6)
    with pytest.raises(ValueError):
        channel_gain(1 + 0j, -1.0)


def test_large_scale_fading():
    assert large_scale_fading('unit') == 1.0
    rng = np.random.default_rng(0)
    db = 10 * np.log10([large_scale_fading('log-normal-shadowing', 8.0, rng) for _ in range(20000)])
    assert np.std(db) == pytest.approx(8.0, rel=0.05)
    with pytest.raises(ValueError):
        large_scale_fading('rayleigh')


def test_reference_gain():
    assert reference_gain(SimConfig()) == pytest.approx((1e-6 / 0.8) ** 2, rel=1e-12)


def test_uplink_rate():
    assert uplink_rate(150e6, 1.0, 1e-11, 1e-11) == 150e6
    assert uplink_rate(150e6, 200.0, 0.0, 1e-11) == 0
    assert uplink_rate(150e6, 3.0, 1e-11, 1e-11) == pytest.approx(3.0e8, rel=1e-12)
    with pytest.raises(ValueError):
        uplink_rate(0.0, 1.0, 1.0, 1e-11)


def test_uplink_rate_is_increasing():
    rng = np.random.default_rng(11)
    for _ in range(200):
        p, g = rng.uniform(1, 300), rng.uniform(1e-16, 1e-10)
        base = uplink_rate(150e6, p, g, 1e-11)
        assert uplink_rate(150e6, p * 1.01, g, 1e-11) > base
        assert uplink_rate(150e6, p, g * 1.01, 1e-11) > base


########################################################################################################################
# workload

def test_sample_workloads():
    config = SimConfig()
    workloads = sample_workloads(config, np.random.default_rng(0))
    assert len(workloads) == config.n_vehicles
    for w in workloads:
        assert 1024 <= w.twin_bytes <= 1536
        assert 1024 <= w.task_bytes <= 1536
        assert w.twin_deadline_s == w.task_deadline_s == 0.5
        assert w.twin_cycles_per_byte == w.task_cycles_per_byte == 0.25e6
    collapsed = SimConfig(twin_bytes_range=(1280, 1280), task_bytes_range=(1280, 1280))
    for w in sample_workloads(collapsed, np.random.default_rng(0)):
        assert w.twin_bytes == w.task_bytes == 1280.0


def test_twin_delay():
    assert twin_delay(WORKLOAD_1500, 12000.0, 7.5e8, 1) == pytest.approx(1.5, rel=1e-12)
    one = twin_delay(WORKLOAD_1500, 12000.0, 7.5e8, 1)
    two = twin_delay(WORKLOAD_1500, 12000.0, 7.5e8, 2)
    assert two - 1.0 == pytest.approx(2 * (one - 1.0), rel=1e-12)
    assert twin_delay(WORKLOAD_1500, 12000.0, 1e300, 4) == pytest.approx(1.0, rel=1e-12)
    with pytest.raises(ValueError):
        twin_delay(WORKLOAD_1500, 0.0, 7.5e8, 1)
    with pytest.raises(ValueError):
        twin_delay(WORKLOAD_1500, 12000.0, 0.0, 1)


def test_task_delay():
    assert task_delay(WORKLOAD_1500, 12000.0, 3.75e8) == pytest.approx(2.0, rel=1e-12)
    assert task_delay(WORKLOAD_1500, 12000.0, 7.5e8) == twin_delay(WORKLOAD_1500, 12000.0, 7.5e8, 1)
    empty = WorkloadPair(0.0, 0.25e6, 0.5, 0.0, 0.25e6, 0.5)
    assert task_delay(empty, 12000.0, 3.75e8) == 0


def test_delay_monotonicity():
    rng = np.random.default_rng(5)
    for _ in range(200):
        rate, f = rng.uniform(1e6, 1e9), rng.uniform(1e8, 1e10)
        assert twin_delay(WORKLOAD_1500, rate, f * 1.01, 4) < twin_delay(WORKLOAD_1500, rate, f, 4)
        assert twin_delay(WORKLOAD_1500, rate * 1.01, f, 4) < twin_delay(WORKLOAD_1500, rate, f, 4)
        assert twin_delay(WORKLOAD_1500, rate, f, 5) > twin_delay(WORKLOAD_1500, rate, f, 4)
        assert task_delay(WORKLOAD_1500, rate, f * 1.01) < task_delay(WORKLOAD_1500, rate, f)
        assert task_delay(WORKLOAD_1500, rate * 1.01, f) < task_delay(WORKLOAD_1500, rate, f)


def test_satisfaction():
    assert satisfaction(0.0, 0.5) == 1.0
    assert satisfaction(0.5, 0.5) == pytest.approx(1 - math.log(2), abs=1e-12)
    assert satisfaction((math.e - 1) * 0.5, 0.5) == pytest.approx(0.0, abs=1e-12)
    grid = np.linspace(0, 5, 101)
    values = np.array([satisfaction(t, 0.5) for t in grid])
    assert np.all(np.diff(values) < 0)
    assert np.all(np.diff(values, 2) > 0)
    with pytest.raises(ValueError):
        satisfaction(-1.0, 0.5)
    with pytest.raises(ValueError):
        satisfaction(1.0, 0.0)


def test_utility():
    assert utility(1.0, 1.0, 0.5) == 1.0
    assert utility(1.0, 0.0, 0.5) == 0.5
    q = 1 - math.log(2)
    assert utility(q, q, 0.5) == pytest.approx(q, abs=1e-15)
    with pytest.raises(ValueError):
        utility(1.0, 1.0, 1.0)


def test_formulas_against_straight_line_oracle():
    rng = np.random.default_rng(2024)
    for _ in range(1000):
        w_hz, p, g, noise = rng.uniform(1e6, 2e8), rng.uniform(1, 300), rng.uniform(1e-14, 1e-9), 1e-11
        d_dt, d_tk, c = rng.uniform(1024, 1536), rng.uniform(1024, 1536), rng.uniform(1e5, 1e6)
        f_dt, f_tk, n = rng.uniform(1e8, 1e10), rng.uniform(1e8, 1e10), int(rng.integers(1, 10))
        deadline, rho = rng.uniform(0.1, 1.0), rng.uniform(0.01, 0.99)

        rate = w_hz * math.log(1 + p * g / noise, 2)
        t_dt = 8 * d_dt / rate + d_dt * c / f_dt * n
        t_tk = 8 * d_tk / rate + d_tk * c / f_tk
        q_dt = 1 - math.log(1 + t_dt / deadline)
        q_tk = 1 - math.log(1 + t_tk / deadline)
        u = rho * q_dt + (1 - rho) * q_tk

        work = WorkloadPair(d_dt, c, deadline, d_tk, c, deadline)
        got_rate = uplink_rate(w_hz, p, g, noise)
        got_dt = twin_delay(work, got_rate, f_dt, n)
        got_tk = task_delay(work, got_rate, f_tk)
        got_u = utility(satisfaction(got_dt, deadline), satisfaction(got_tk, deadline), rho)
        assert got_rate == pytest.approx(rate, rel=1e-12)
        assert got_dt == pytest.approx(t_dt, rel=1e-12)
        assert got_tk == pytest.approx(t_tk, rel=1e-12)
        assert got_u == pytest.approx(u, rel=1e-12, abs=1e-12)


########################################################################################################################
# constraints and rewards

def test_check_and_project_passes_feasible_request():
    config = SimConfig(n_vehicles=2, server_capacity_hz=10e9)
    joint = [Allocation(2e9, 2e9), Allocation(3e9, 3e9)]
    granted, reports = check_and_project(joint, config)
    assert granted == joint
    assert all(r.budget_ok and r.power_ok and r.scale_applied == 1.0 for r in reports)


def test_check_and_project_scales_excess():
    config = SimConfig(n_vehicles=2, server_capacity_hz=10e9)
    granted, reports = check_and_project([Allocation(4e9, 6e9), Allocation(5e9, 5e9)], config)
    assert [a.f_twin_hz for a in granted] == pytest.approx([2e9, 2.5e9])
    assert [a.f_task_hz for a in granted] == pytest.approx([3e9, 2.5e9])
    assert all(not r.budget_ok and r.scale_applied == pytest.approx(0.5) for r in reports)

    single = SimConfig(n_vehicles=1, server_capacity_hz=10e9)
    granted, _ = check_and_project([Allocation(10e9, 10e9)], single)
    assert (granted[0].f_twin_hz, granted[0].f_task_hz) == pytest.approx((5e9, 5e9))

    with pytest.raises(ValueError):
        check_and_project([Allocation(0.0, 1e9)], single)


def test_projection_never_exceeds_capacity():
    config = SimConfig()
    rng = np.random.default_rng(99)
    capacity = config.capacity_hz
    for indices in rng.integers(config.action_count, size=(100000, config.n_vehicles)):
        granted, _ = check_and_project([action_to_allocation(int(i), config) for i in indices], config)
        assert sum(a.total_hz for a in granted) <= capacity * (1 + 1e-9)


def test_reward():
    config = SimConfig()
    assert reward(0.8, ALL_OK, config) == 0.8
    over_budget = ConstraintReport(True, True, False, True, 0.5)
    assert reward(0.8, over_budget, config) == pytest.approx(-0.2)
    late = ConstraintReport(False, False, True, True, 1.0)
    assert reward(0.5, late, config) == pytest.approx(-0.5)


def test_reward_equals_utility_when_constraints_hold():
    config = SimConfig()
    for u in np.random.default_rng(1).uniform(-2, 1, size=100):
        assert reward(float(u), ALL_OK, config) == float(u)


def test_discounted_return():
    assert discounted_return([1, 1, 1], 0.5) == 1.75
    assert discounted_return([0.5, -1.0, 2.0], 1.0) == 1.5
    assert discounted_return([], 0.9) == 0
    with pytest.raises(ValueError):
        discounted_return([1.0], 1.5)


########################################################################################################################
# slot dynamics

def test_step_composes_hand_oracle():
    # bandwidth, power and gain chosen for a 12 kbit/s uplink
    config = SimConfig(n_vehicles=1, bandwidth_hz=12000.0, noise_mw=1e-11, tx_power_mw=200.0,
                       server_capacity_hz=2e9)
    vehicle = VehicleState(id=0, lane_j=0, x_m=-5.0, y_m=10.0, speed_mps=10.0, h_complex=1 + 0j, gain=5e-14)
    (moved,), outcome = step([vehicle], [WORKLOAD_1500], [Allocation(7.5e8, 3.75e8)], config)

    assert outcome.rate_bps[0] == pytest.approx(12000.0, rel=1e-9)
    assert outcome.twin_delay_s[0] == pytest.approx(1.5, rel=1e-9)
    assert outcome.task_delay_s[0] == pytest.approx(2.0, rel=1e-9)
    q_dt, q_tk = 1 - math.log(4), 1 - math.log(5)
    assert outcome.satisfaction_twin[0] == pytest.approx(q_dt, rel=1e-9)
    assert outcome.satisfaction_task[0] == pytest.approx(q_tk, rel=1e-9)
    u = 0.5 * q_dt + 0.5 * q_tk
    assert outcome.utility[0] == pytest.approx(u, rel=1e-9)
    assert outcome.reward[0] == pytest.approx(u - 2 * 0.5, rel=1e-9)
    assert outcome.utilization == pytest.approx(1.125e9 / 2e9)
    assert outcome.conversion_ratio == pytest.approx(u / 1.125, rel=1e-9)
    report = outcome.reports[0]
    assert report.budget_ok and not report.twin_deadline_ok and not report.task_deadline_ok
    assert not outcome.budget_violated

    assert moved.x_m == pytest.approx(-4.0)
    d = math.dist((-4.0, 10.0, 0.0), (0.0, 0.0, 10.0))
    assert moved.h_complex == pytest.approx(0.2 + d ** -3.0, rel=1e-12)
    assert moved.gain == pytest.approx(abs(moved.h_complex) ** 2, rel=1e-12)


def test_step_errors():
    config = SimConfig(n_vehicles=1, server_capacity_hz=2e9)
    vehicle = VehicleState(id=0, lane_j=0, x_m=-5.0, y_m=10.0, speed_mps=10.0)
    with pytest.raises(ValueError, match='one workload and one allocation'):
        step([vehicle], [WORKLOAD_1500], [], config)
    shadowed = SimConfig(n_vehicles=1, server_capacity_hz=2e9, large_scale_mode='log-normal-shadowing')
    with pytest.raises(ValueError, match='random generator'):
        step([vehicle], [WORKLOAD_1500], [Allocation(1e8, 1e8)], shadowed)


def _fixed_actions(env):
    return [action_to_allocation((env.slot + i) % env.config.action_count, env.config)
            for i in range(env.config.n_vehicles)]


def test_environment_is_deterministic(tiny_config):
    first = Environment(tiny_config, 5).rollout(_fixed_actions, 3)
    second = Environment(tiny_config, 5).rollout(_fixed_actions, 3)
    assert first == second
    other = Environment(tiny_config, 6).rollout(_fixed_actions, 3)
    assert other[0] != first[0]


def test_environment_with_shadowing_and_innovation_is_deterministic(tiny_config):
    config = replace(tiny_config, large_scale_mode='log-normal-shadowing', fading_innovation=True)
    assert Environment(config, 5).rollout(_fixed_actions, 2) == Environment(config, 5).rollout(_fixed_actions, 2)


def test_environment_episodes(tiny_config):
    env = Environment(tiny_config, 1)
    rows, outcomes = env.rollout(_fixed_actions, 0)
    assert rows == [] and outcomes == []

    rows, outcomes = env.rollout(_fixed_actions, 2)
    assert len(outcomes) == 2 * tiny_config.episode_slots
    assert len(rows) == 2 * tiny_config.episode_slots * tiny_config.n_vehicles
    assert list(rows[0].keys()) == TRAJECTORY_COLUMNS
    assert sorted({r['episode'] for r in rows}) == [0, 1]
    assert env.done
    with pytest.raises(RuntimeError):
        env.step(_fixed_actions(env))


def test_lane_geometry_holds_over_an_episode():
    config = SimConfig(episode_slots=50)
    env = Environment(config, 3)
    env.reset()
    while not env.done:
        for v in env.vehicles:
            k = (v.y_m - config.first_lane_offset_m) / config.lane_width_m
            assert k == int(k) and 0 <= k <= config.n_lanes - 1
        outcome = env.step(_fixed_actions(env))
        assert 0 <= outcome.utilization <= 1


def test_outcome_rows_follow_executing_state(tiny_config):
    env = Environment(tiny_config, 2)
    env.reset()
    vehicles = env.vehicles
    outcome = env.step(_fixed_actions(env))
    rows = outcome_rows(0, 0, vehicles, outcome)
    assert [r['vehicle_id'] for r in rows] == [0, 1]
    assert rows[1]['x_m'] == vehicles[1].x_m
    assert rows[1]['f_task_hz'] == outcome.granted[1].f_task_hz
