import math
from enum import Enum
import numpy as np
from DT_VEC.env.core import Allocation
from DT_VEC.agents import (STATE_DIM, ACTION_FEATURE_DIM, Transition, action_feature_table, action_to_allocation,
                           build_agent, critic_target, episode_record, epsilon_at, observe, select_action,
                           store_transition, update_agent, report_episode)

# absorbs rounding when a share is an exact multiple of the grid step
GRID_SLACK = 1e-9


class BaselineKind(Enum):
    RANDOM = 'random'
    EQUAL_SPLIT = 'equal_split'
    SHARED_SINGLE_AGENT = 'shared_single_agent'


def _levels(f_hz, grid_hz, max_levels=None):
    k = max(1, math.floor(f_hz / grid_hz + GRID_SLACK))
    return k if max_levels is None else min(k, max_levels)


def random_alloc(n, capacity_hz, rng, grid_hz, max_levels=None):
    """
    Random baseline: every agent owns the share F/n and splits it at a uniform random point u into
    (u * F/n, (1 - u) * F/n). Both parts are floored to the grid with a minimum of one level; if the two
    minimum levels push the pair over the share, the larger part gives up one level.

    Parameters
    ----------
    n: int
        Number of agents.
    capacity_hz: float
        Server capacity F.
    rng: numpy.random.Generator
    grid_hz: float
        Grid step.
    max_levels: int, optional
        Highest grid level an allocation may use.

    Returns
    -------
    list[DT_VEC.env.core.Allocation]
    """
    if n < 1:
        raise ValueError('the number of agents must be >= 1; got {}'.format(n))
    share = capacity_hz / n
    if share < 2 * grid_hz * (1 - GRID_SLACK):
        raise ValueError('a share of {} Hz cannot hold two grid levels of {} Hz'.format(share, grid_hz))
    out = []
    for u in rng.uniform(0, 1, size=n):
        k_twin = _levels(u * share, grid_hz, max_levels)
        k_task = _levels((1 - u) * share, grid_hz, max_levels)
        while (k_twin + k_task) * grid_hz > share * (1 + GRID_SLACK):
            if k_twin >= k_task:
                k_twin -= 1
            else:
                k_task -= 1
        out.append(Allocation(k_twin * grid_hz, k_task * grid_hz))
    return out


def equal_split(n, capacity_hz, grid_hz, max_levels=None):
    """Every agent requests (F/(2n), F/(2n)), floored to the grid with a minimum of one level."""
    if n < 1:
        raise ValueError('the number of agents must be >= 1; got {}'.format(n))
    k = _levels(capacity_hz / (2 * n), grid_hz, max_levels)
    return [Allocation(k * grid_hz, k * grid_hz) for _ in range(n)]


def baseline_policy(kind, config, rng=None):
    """Allocation policy of a fixed baseline, usable with :meth:`DT_VEC.env.core.Environment.rollout`."""
    kind = BaselineKind(kind)
    if kind == BaselineKind.RANDOM:
        return lambda env: random_alloc(config.n_vehicles, config.capacity_hz, rng, config.grid_hz,
                                        config.levels_per_resource)
    elif kind == BaselineKind.EQUAL_SPLIT:
        return lambda env: equal_split(config.n_vehicles, config.capacity_hz, config.grid_hz,
                                       config.levels_per_resource)
    raise ValueError("baseline '{}' has no fixed policy; train it with shared_single_agent_train".format(kind.value))


def shared_single_agent_train(env, config, episodes, seed, logger=None):
    """
    Trains one actor-critic pair shared by all vehicles. The critic sees a single agent's observation and
    action only. All vehicles act with the shared actor, but in slot t only the experience of vehicle
    t mod N is stored and used for the update.

    Parameters
    ----------
    env: DT_VEC.env.core.Environment
    config: DT_VEC.config.SimConfig
    episodes: int
    seed: int
        Seed of network initialization, exploration and minibatch sampling.
    logger: logging.Logger, optional

    Returns
    -------
    agent: DT_VEC.agents.Agent
        The shared networks; its target actor is the trained policy.
    history: list[dict]
        One record per episode.
    """
    agent = build_agent(STATE_DIM, STATE_DIM + ACTION_FEATURE_DIM, config, np.random.default_rng(seed))
    table = action_feature_table(config)
    history = []
    for k in range(episodes):
        epsilon = epsilon_at(k, episodes, config)
        env.reset()
        rewards, losses, budget_flags = [], [], []
        states = observe(env)
        while not env.done:
            learner = env.slot % config.n_vehicles
            actions = [select_action(agent.actor_est, s, epsilon, agent.rng) for s in states]
            outcome = env.step([action_to_allocation(a, config) for a in actions])
            next_states = observe(env)
            a = actions[learner]
            store_transition(agent.buffer, Transition(state=states[learner], action=a, action_features=table[a],
                                                      reward=outcome.reward[learner],
                                                      next_state=next_states[learner],
                                                      joint_state=states[learner], joint_action=table[a],
                                                      next_joint_state=next_states[learner], done=env.done))
            if len(agent.buffer) >= config.batch_size:
                batch = agent.buffer.sample(config.batch_size, agent.rng)
                y = critic_target(batch, [agent.actor_tgt], agent.critic_tgt, config.gamma, table)
                losses.append(update_agent(agent, batch, y, 0, table, config.eta))
            rewards.extend(outcome.reward)
            budget_flags.append(outcome.budget_violated)
            states = next_states
        record = episode_record(k, rewards, epsilon, losses, budget_flags)
        history.append(record)
        report_episode(logger, BaselineKind.SHARED_SINGLE_AGENT.value, seed, k, episodes, record)
    return agent, history


def shared_actors(agent, config):
    """Execution actors of the shared baseline: every vehicle acts with the shared target actor."""
    return [agent.actor_tgt] * config.n_vehicles
