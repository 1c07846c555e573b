from dataclasses import dataclass, replace
import numpy as np
from DT_VEC.env.mobility import init_scenario, advance_position
from DT_VEC.env.channel import update_small_scale, channel_gain, large_scale_fading, uplink_rate
from DT_VEC.env.workload import sample_workloads, twin_delay, task_delay, satisfaction, utility
from DT_VEC.metadata.mapping import TRAJECTORY_COLUMNS

# relative slack when comparing a joint request against the server capacity
BUDGET_RTOL = 1e-12


@dataclass(frozen=True)
class Allocation:
    """CPU frequencies (Hz) one agent requests, or is granted, for twin maintenance and its task."""
    f_twin_hz: float
    f_task_hz: float

    @property
    def total_hz(self):
        return self.f_twin_hz + self.f_task_hz


@dataclass(frozen=True)
class ConstraintReport:
    twin_deadline_ok: bool
    task_deadline_ok: bool
    budget_ok: bool
    power_ok: bool
    scale_applied: float


@dataclass(frozen=True)
class StepOutcome:
    """
    Per-vehicle results of one slot (tuples ordered by vehicle id) and the slot aggregates.
    `utilization` is the granted share of the server capacity, `conversion_ratio` the summed utility per
    granted GHz.
    """
    granted: tuple
    reports: tuple
    rate_bps: tuple
    twin_delay_s: tuple
    task_delay_s: tuple
    satisfaction_twin: tuple
    satisfaction_task: tuple
    utility: tuple
    reward: tuple
    utilization: float
    conversion_ratio: float

    @property
    def budget_violated(self):
        return not self.reports[0].budget_ok


def check_and_project(joint, config):
    """
    Checks a joint request against the server budget and the transmit power limit. If the summed request
    exceeds the capacity F, every frequency is scaled by F / sum so that the executed allocation always
    fits the budget.

    Parameters
    ----------
    joint: list[Allocation]
        One request per vehicle.
    config: DT_VEC.config.SimConfig

    Returns
    -------
    granted: list[Allocation]
    reports: list[ConstraintReport]
        Deadline flags are preset to True; they are settled by :func:`step` once delays are known.
    """
    for a in joint:
        if not (a.f_twin_hz > 0 and a.f_task_hz > 0):
            raise ValueError('allocations must be strictly positive; got {}'.format(a))
    capacity = config.capacity_hz
    total = sum(a.total_hz for a in joint)
    if total <= capacity * (1 + BUDGET_RTOL):
        scale = 1.0
        budget_ok = True
        granted = list(joint)
    else:
        scale = capacity / total
        budget_ok = False
        granted = [Allocation(a.f_twin_hz * scale, a.f_task_hz * scale) for a in joint]
    power_ok = config.tx_power_mw <= config.tx_power_max_mw
    reports = [ConstraintReport(twin_deadline_ok=True, task_deadline_ok=True, budget_ok=budget_ok,
                                power_ok=power_ok, scale_applied=scale) for _ in joint]
    return granted, reports


def reward(u, report, config):
    """
    Per-agent reward: the utility, minus `penalty_budget` if the joint request exceeded the capacity and
    `penalty_deadline` per missed deadline. With all constraints met the reward equals the utility.
    """
    r = u
    if not report.budget_ok:
        r -= config.penalty_budget
    missed = int(not report.twin_deadline_ok) + int(not report.task_deadline_ok)
    if missed > 0:
        r -= config.penalty_deadline * missed
    return r


def discounted_return(rewards, gamma):
    """R = sum_k gamma^k * r_k, k counting slots from the first reward."""
    if not 0 <= gamma <= 1:
        raise ValueError('discount factor must lie in [0, 1]; got {}'.format(gamma))
    out = 0.0
    weight = 1.0
    for r in rewards:
        out += weight * r
        weight *= gamma
    return out


def step(vehicles, workloads, joint, config, rng=None):
    """
    Executes one slot: projects the joint request, computes rates from the current gains, both delays,
    satisfactions, utilities and rewards, then advances positions and fading states.

    Parameters
    ----------
    vehicles: list[DT_VEC.env.mobility.VehicleState]
    workloads: list[DT_VEC.env.workload.WorkloadPair]
    joint: list[Allocation]
        One request per vehicle.
    config: DT_VEC.config.SimConfig
    rng: numpy.random.Generator, optional
        Required for log-normal shadowing or fading innovation.

    Returns
    -------
    next_vehicles: list[DT_VEC.env.mobility.VehicleState]
    outcome: StepOutcome
    """
    if not len(vehicles) == len(workloads) == len(joint):
        raise ValueError('expected one workload and one allocation per vehicle; got {} vehicles, {} workloads '
                         'and {} allocations'.format(len(vehicles), len(workloads), len(joint)))
    needs_rng = config.large_scale_mode != 'unit' or config.fading_innovation
    if needs_rng and rng is None:
        raise ValueError('a random generator is required for shadowing or fading innovation')
    granted, reports = check_and_project(joint, config)

    rates, t_twin, t_task, q_twin, q_task, utils, rewards, final_reports = [], [], [], [], [], [], [], []
    for v, w, g, rep in zip(vehicles, workloads, granted, reports):
        rate = uplink_rate(config.bandwidth_hz, config.tx_power_mw, v.gain, config.noise_mw)
        td = twin_delay(w, rate, g.f_twin_hz, config.n_vehicles)
        tk = task_delay(w, rate, g.f_task_hz)
        qd = satisfaction(td, w.twin_deadline_s)
        qk = satisfaction(tk, w.task_deadline_s)
        u = utility(qd, qk, config.weight_rho)
        rep = replace(rep, twin_deadline_ok=td <= w.twin_deadline_s, task_deadline_ok=tk <= w.task_deadline_s)
        rates.append(rate)
        t_twin.append(td)
        t_task.append(tk)
        q_twin.append(qd)
        q_task.append(qk)
        utils.append(u)
        final_reports.append(rep)
        rewards.append(reward(u, rep, config))

    total_ghz = sum(g.total_hz for g in granted) / 1e9
    outcome = StepOutcome(granted=tuple(granted), reports=tuple(final_reports), rate_bps=tuple(rates),
                          twin_delay_s=tuple(t_twin), task_delay_s=tuple(t_task),
                          satisfaction_twin=tuple(q_twin), satisfaction_task=tuple(q_task),
                          utility=tuple(utils), reward=tuple(rewards),
                          utilization=min(1.0, total_ghz * 1e9 / config.capacity_hz),
                          conversion_ratio=sum(utils) / total_ghz)

    innovation_rng = rng if config.fading_innovation else None
    next_vehicles = []
    for v in vehicles:
        moved = advance_position(v, config.slot_s)
        h = update_small_scale(moved.h_complex, moved.position, config.bs_position,
                               config.corr_coeff, config.pathloss_exp, rng=innovation_rng)
        large = large_scale_fading(config.large_scale_mode, config.shadowing_sigma_db, rng)
        next_vehicles.append(replace(moved, h_complex=h, gain=channel_gain(h, large)))
    return next_vehicles, outcome


def outcome_rows(episode, slot, vehicles, outcome):
    """Trajectory CSV rows (one per vehicle) for a slot executed from state `vehicles`."""
    rows = []
    for i, v in enumerate(vehicles):
        values = [episode, slot, v.id, v.x_m, v.y_m, v.gain, outcome.rate_bps[i],
                  outcome.granted[i].f_twin_hz, outcome.granted[i].f_task_hz,
                  outcome.twin_delay_s[i], outcome.task_delay_s[i], outcome.utility[i], outcome.reward[i]]
        rows.append(dict(zip(TRAJECTORY_COLUMNS, values)))
    return rows


class Environment:
    """
    Episode wrapper around the slot dynamics. Every allocation policy (learned or baseline) drives the
    network through this class: `reset` places a new fleet, `step` executes one joint allocation and draws
    the workloads of the next slot.

    Parameters
    ----------
    config: DT_VEC.config.SimConfig
    seed: int
        Seed of the environment random stream (placement, workloads, shadowing, innovation).
    """
    def __init__(self, config, seed):
        self.config = config
        self.rng = np.random.default_rng(seed)
        self.vehicles = []
        self.workloads = []
        self.slot = 0
        self.episode = -1

    def reset(self):
        config = self.config
        self.vehicles = init_scenario(config, int(self.rng.integers(2 ** 63)))
        if config.large_scale_mode != 'unit':
            self.vehicles = [replace(v, gain=channel_gain(v.h_complex, large_scale_fading(
                config.large_scale_mode, config.shadowing_sigma_db, self.rng))) for v in self.vehicles]
        self.workloads = sample_workloads(config, self.rng)
        self.slot = 0
        self.episode += 1
        return self.vehicles, self.workloads

    @property
    def done(self):
        return self.slot >= self.config.episode_slots

    def step(self, joint):
        """
        Executes one slot.

        Returns
        -------
        StepOutcome
        """
        if self.done:
            raise RuntimeError('episode {} is finished; call reset() first'.format(self.episode))
        self.vehicles, outcome = step(self.vehicles, self.workloads, joint, self.config, self.rng)
        self.workloads = sample_workloads(self.config, self.rng)
        self.slot += 1
        return outcome

    def rollout(self, policy, episodes):
        """
        Runs `episodes` full episodes with a fixed policy.

        Parameters
        ----------
        policy: callable
            Maps the environment (current vehicles and workloads) to one Allocation per vehicle.
        episodes: int

        Returns
        -------
        rows: list[dict]
            Trajectory rows, episodes numbered from 0.
        outcomes: list[StepOutcome]
        """
        rows = []
        outcomes = []
        for episode in range(episodes):
            self.reset()
            while not self.done:
                vehicles, slot = self.vehicles, self.slot
                outcome = self.step(policy(self))
                rows.extend(outcome_rows(episode, slot, vehicles, outcome))
                outcomes.append(outcome)
        return rows, outcomes
