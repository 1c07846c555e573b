import os
import math
from dataclasses import dataclass, fields
import numpy as np
from DT_VEC import nn
from DT_VEC.ancillary import log
from DT_VEC.env.core import Allocation
from DT_VEC.env.channel import reference_gain
from DT_VEC.metadata.mapping import FEATURE_MAP

STATE_DIM = len(FEATURE_MAP)
ACTION_FEATURE_DIM = 2
# upper bound of the gain feature
GAIN_FEATURE_CAP = 4.0


def encode_state(vehicle, workload, config):
    """
    Local observation of one agent: the twin payload, the task, the vehicle position, speed and channel gain,
    each scaled to order one. The gain feature is capped at :data:`GAIN_FEATURE_CAP`.

    Parameters
    ----------
    vehicle: DT_VEC.env.mobility.VehicleState
    workload: DT_VEC.env.workload.WorkloadPair
    config: DT_VEC.config.SimConfig

    Returns
    -------
    numpy.ndarray
        The feature vector in the order of :data:`DT_VEC.metadata.mapping.FEATURE_MAP`.
    """
    g_ref = reference_gain(config)
    y_ref = config.first_lane_offset_m + config.n_lanes * config.lane_width_m
    return np.array([workload.twin_bytes / FEATURE_MAP['twin_bytes'],
                     workload.twin_cycles_per_byte / FEATURE_MAP['twin_cycles_per_byte'],
                     workload.twin_deadline_s / FEATURE_MAP['twin_deadline_s'],
                     workload.task_bytes / FEATURE_MAP['task_bytes'],
                     workload.task_cycles_per_byte / FEATURE_MAP['task_cycles_per_byte'],
                     workload.task_deadline_s / FEATURE_MAP['task_deadline_s'],
                     vehicle.x_m / config.road_half_len_m,
                     vehicle.y_m / y_ref,
                     vehicle.speed_mps / FEATURE_MAP['speed_mps'],
                     min(math.log2(1 + vehicle.gain / g_ref), GAIN_FEATURE_CAP)], dtype=np.float64)


def select_action(actor, state, epsilon, rng):
    """
    Epsilon-greedy action choice: with probability `epsilon` a uniformly random action, otherwise the most
    probable action of `actor` (lowest index on ties).
    """
    if not 0 <= epsilon <= 1:
        raise ValueError('epsilon must lie in [0, 1]; got {}'.format(epsilon))
    n_actions = actor.layer_dims[-1]
    if rng.random() < epsilon:
        return int(rng.integers(n_actions))
    probs, _ = nn.forward(actor, state)
    return int(np.argmax(probs))


def action_to_allocation(index, config):
    """Decodes an action index into the grid levels (index // L + 1, index % L + 1) times the grid step."""
    levels = config.levels_per_resource
    if not 0 <= index < config.action_count:
        raise ValueError('action index must lie in [0, {}); got {}'.format(config.action_count, index))
    return Allocation(f_twin_hz=(index // levels + 1) * config.grid_hz,
                      f_task_hz=(index % levels + 1) * config.grid_hz)


def allocation_to_action(allocation, config):
    """Inverse of :func:`action_to_allocation` for allocations on the grid."""
    levels = config.levels_per_resource
    k_twin = int(round(allocation.f_twin_hz / config.grid_hz))
    k_task = int(round(allocation.f_task_hz / config.grid_hz))
    if not (1 <= k_twin <= levels and 1 <= k_task <= levels):
        raise ValueError('allocation {} is not on the action grid'.format(allocation))
    return (k_twin - 1) * levels + (k_task - 1)


def action_feature_table(config):
    """(f_twin / F, f_task / F) of every action index; shape (L^2, 2)."""
    table = np.empty((config.action_count, ACTION_FEATURE_DIM))
    for index in range(config.action_count):
        a = action_to_allocation(index, config)
        table[index] = a.f_twin_hz / config.capacity_hz, a.f_task_hz / config.capacity_hz
    return table


def epsilon_at(episode, episodes, config):
    """Exploration rate of a (zero-based) training episode: linear decay, then constant."""
    decay_episodes = config.epsilon_decay_fraction * episodes
    if decay_episodes <= 0:
        return config.epsilon_end
    frac = min(1.0, episode / decay_episodes)
    return config.epsilon_start + (config.epsilon_end - config.epsilon_start) * frac


@dataclass(frozen=True)
class Transition:
    """
    One experience of agent n. `joint_*` hold the concatenated observations and action features of all
    agents, consumed only by the centralized critics.
    """
    state: np.ndarray
    action: int
    action_features: np.ndarray
    reward: float
    next_state: np.ndarray
    joint_state: np.ndarray
    joint_action: np.ndarray
    next_joint_state: np.ndarray
    done: bool


@dataclass
class Batch:
    """A minibatch of transitions; every field carries a leading batch dimension."""
    state: np.ndarray
    action: np.ndarray
    action_features: np.ndarray
    reward: np.ndarray
    next_state: np.ndarray
    joint_state: np.ndarray
    joint_action: np.ndarray
    next_joint_state: np.ndarray
    done: np.ndarray

    @classmethod
    def from_transitions(cls, transitions):
        if len(transitions) == 0:
            raise ValueError('cannot build a batch from zero transitions')
        return cls(**{f.name: np.array([getattr(t, f.name) for t in transitions]) for f in fields(Transition)})

    def __len__(self):
        return len(self.reward)


class ReplayBuffer:
    """
    First-in first-out experience store of fixed capacity backed by preallocated arrays.

    Parameters
    ----------
    capacity: int
        Maximum number of transitions; the oldest one is overwritten beyond it.
    """
    def __init__(self, capacity):
        if capacity < 1:
            raise ValueError('replay buffer capacity must be >= 1; got {}'.format(capacity))
        self.capacity = capacity
        self._data = None
        self._next = 0
        self._size = 0

    def __len__(self):
        return self._size

    def add(self, transition):
        if self._data is None:
            self._data = {}
            for f in fields(Transition):
                value = np.asarray(getattr(transition, f.name))
                dtype = {'action': np.int64, 'done': bool}.get(f.name, np.float64)
                self._data[f.name] = np.zeros((self.capacity,) + value.shape, dtype=dtype)
        for name, array in self._data.items():
            array[self._next] = getattr(transition, name)
        self._next = (self._next + 1) % self.capacity
        self._size = min(self._size + 1, self.capacity)

    def _order(self):
        if self._size < self.capacity:
            return np.arange(self._size)
        return (np.arange(self.capacity) + self._next) % self.capacity

    def transitions(self):
        """Stored transitions, oldest first."""
        if self._data is None:
            return []
        return [Transition(**{name: array[i] for name, array in self._data.items()}) for i in self._order()]

    def sample(self, batch_size, rng):
        """Uniform minibatch without replacement (with replacement if fewer transitions than requested)."""
        if self._size == 0:
            raise ValueError('cannot sample from an empty replay buffer')
        idx = rng.choice(self._size, size=batch_size, replace=self._size < batch_size)
        return Batch(**{name: array[idx] for name, array in self._data.items()})


def store_transition(buffer, transition):
    buffer.add(transition)


def _agent_slice(n, width):
    return slice(n * width, (n + 1) * width)


def critic_target(batch, target_actors, critic_tgt, gamma, action_table):
    """
    Bellman targets y = r + gamma * Q'(S', A') with A' the greedy actions of every agent's target actor on
    its next observation. Terminal transitions use y = r.

    Parameters
    ----------
    batch: Batch
    target_actors: list[DT_VEC.nn.Mlp]
        One per agent, in the order of the joint observation.
    critic_tgt: DT_VEC.nn.Mlp
    gamma: float
    action_table: numpy.ndarray
        Action features per action index.

    Returns
    -------
    numpy.ndarray
    """
    return critic_targets([batch], target_actors, [critic_tgt], gamma, action_table)[0]


def critic_targets(batches, target_actors, critics_tgt, gamma, action_table):
    """
    Bellman targets of several agents' batches at once. Each target actor runs a single forward pass over the
    stacked next observations of all batches; the targets then equal those of :func:`critic_target` applied
    to every (batch, critic) pair with the same target actors.

    Parameters
    ----------
    batches: list[Batch]
    target_actors: list[DT_VEC.nn.Mlp]
    critics_tgt: list[DT_VEC.nn.Mlp]
        One target critic per batch.
    gamma: float
    action_table: numpy.ndarray

    Returns
    -------
    list[numpy.ndarray]
        One target vector per batch.
    """
    if len(batches) != len(critics_tgt):
        raise ValueError('expected one target critic per batch; got {} batches and {} critics'
                         .format(len(batches), len(critics_tgt)))
    if any(len(b) == 0 for b in batches):
        raise ValueError('critic targets require a nonempty batch')
    next_joint_state = np.vstack([b.next_joint_state for b in batches])
    next_actions = []
    for m, actor in enumerate(target_actors):
        probs, _ = nn.forward(actor, next_joint_state[:, _agent_slice(m, STATE_DIM)])
        next_actions.append(action_table[np.argmax(probs, axis=1)])
    critic_input = np.hstack([next_joint_state] + next_actions)
    out = []
    start = 0
    for batch, critic in zip(batches, critics_tgt):
        q_next, _ = nn.forward(critic, critic_input[start:start + len(batch)])
        out.append(batch.reward + gamma * (1 - batch.done) * q_next[:, 0])
        start += len(batch)
    return out


def critic_update(critic_est, batch, y, optimizer):
    """
    One descent step on the mean squared TD error of `critic_est` over the batch.

    Returns
    -------
    float
        The loss before the step.
    """
    if optimizer.net is not critic_est:
        raise ValueError('the optimizer is bound to a different network')
    q, cache = nn.forward(critic_est, np.hstack([batch.joint_state, batch.joint_action]))
    y = np.asarray(y, dtype=np.float64)
    if y.shape != (len(batch),):
        raise ValueError('expected {} targets; got shape {}'.format(len(batch), y.shape))
    delta = y - q[:, 0]
    loss = float(np.mean(delta ** 2))
    grads = nn.backward(critic_est, cache, (-2 * delta / len(batch)).reshape(-1, 1))
    optimizer.step(grads)
    return loss


def actor_update(actor_est, critic_est, batch, optimizer, agent_index, action_table, rng):
    """
    Policy-gradient step for agent `agent_index`: its action is re-sampled from `actor_est`, the other agents'
    actions are taken from the batch, and mean(log pi(a|s) * (Q(S, A) - b)) is ascended. The baseline b is the
    critic value of the stored joint action, which does not depend on the re-sampled action. The critic is not
    modified.

    Returns
    -------
    float
        The objective before the step.
    """
    if optimizer.net is not actor_est:
        raise ValueError('the optimizer is bound to a different network')
    probs, cache = nn.forward(actor_est, batch.state)
    n = len(batch)
    u = rng.random(n)
    actions = np.minimum((np.cumsum(probs, axis=1) < u[:, None]).sum(axis=1), probs.shape[1] - 1)

    joint_action = batch.joint_action.copy()
    joint_action[:, _agent_slice(agent_index, ACTION_FEATURE_DIM)] = action_table[actions]
    q, _ = nn.forward(critic_est, np.vstack([np.hstack([batch.joint_state, joint_action]),
                                             np.hstack([batch.joint_state, batch.joint_action])]))
    advantage = q[:n, 0] - q[n:, 0]

    rows = np.arange(n)
    p_taken = probs[rows, actions]
    upstream = np.zeros_like(probs)
    upstream[rows, actions] = -advantage / (n * p_taken)
    grads = nn.backward(actor_est, cache, upstream)
    optimizer.step(grads)
    return float(np.mean(np.log(p_taken) * advantage))


@dataclass
class Agent:
    """Networks, optimizers, experience and random stream owned by one agent."""
    actor_est: nn.Mlp
    actor_tgt: nn.Mlp
    critic_est: nn.Mlp
    critic_tgt: nn.Mlp
    actor_opt: nn.Optimizer
    critic_opt: nn.Optimizer
    buffer: ReplayBuffer
    rng: np.random.Generator


def update_agent(agent, batch, y, agent_index, action_table, eta):
    """
    Takes one critic step towards the targets `y` and one actor step on `batch`, then moves both target
    networks towards their estimation networks.

    Returns
    -------
    float
        The critic loss before the step.
    """
    loss = critic_update(agent.critic_est, batch, y, agent.critic_opt)
    actor_update(agent.actor_est, agent.critic_est, batch, agent.actor_opt, agent_index, action_table, agent.rng)
    nn.soft_update(agent.actor_tgt, agent.actor_est, eta)
    nn.soft_update(agent.critic_tgt, agent.critic_est, eta)
    return loss


def build_agent(state_dim, critic_dim, config, rng):
    """An agent with freshly initialized estimation networks and target networks copied from them."""
    actor = nn.build_actor(state_dim, config.action_count, rng, logit_scale=config.logit_scale)
    critic = nn.build_critic(critic_dim, rng, q_scale=config.q_scale)
    return Agent(actor_est=actor, actor_tgt=nn.copy_mlp(actor), critic_est=critic, critic_tgt=nn.copy_mlp(critic),
                 actor_opt=nn.Optimizer(actor, config.optimizer, config.lr_actor),
                 critic_opt=nn.Optimizer(critic, config.optimizer, config.lr_critic),
                 buffer=ReplayBuffer(config.buffer_capacity), rng=rng)


class AgentSet:
    """
    The N learning agents of MADRL-CSTC. Each agent owns an actor and a centralized critic (estimation and
    target copies), a replay buffer and an independent random stream spawned from `seed`.

    Parameters
    ----------
    config: DT_VEC.config.SimConfig
    seed: int
    """
    def __init__(self, config, seed):
        self.config = config
        self.seed = seed
        self.gamma = config.gamma
        self.eta = config.eta
        self.epsilon = config.epsilon_start
        self.episodes_run = 0
        self.action_table = action_feature_table(config)
        critic_dim = config.n_vehicles * (STATE_DIM + ACTION_FEATURE_DIM)
        streams = np.random.SeedSequence(seed).spawn(config.n_vehicles)
        self.agents = [build_agent(STATE_DIM, critic_dim, config, np.random.default_rng(s)) for s in streams]

    def __len__(self):
        return len(self.agents)

    @property
    def target_actors(self):
        return [a.actor_tgt for a in self.agents]

    def act(self, states, epsilon):
        """Training actions: epsilon-greedy on each estimation actor."""
        return [select_action(a.actor_est, s, epsilon, a.rng) for a, s in zip(self.agents, states)]

    @property
    def lr_actor(self):
        return self.agents[0].actor_opt.lr

    @lr_actor.setter
    def lr_actor(self, value):
        for a in self.agents:
            a.actor_opt.lr = value

    @property
    def lr_critic(self):
        return self.agents[0].critic_opt.lr

    @lr_critic.setter
    def lr_critic(self, value):
        for a in self.agents:
            a.critic_opt.lr = value

    def learn(self, n):
        """One critic, actor and soft target update of agent n. Returns the critic loss."""
        return self.learn_all([n])[0]

    def learn_all(self, indices):
        """
        Updates the agents `indices` of one slot. Every agent samples its own minibatch, the Bellman targets of
        all of them are computed from the target actors as they stand before the slot's updates, then each
        agent takes its critic, actor and soft target steps.

        Returns
        -------
        list[float]
            The critic losses, in the order of `indices`.
        """
        indices = list(indices)
        if len(indices) == 0:
            return []
        agents = [self.agents[n] for n in indices]
        batches = [a.buffer.sample(self.config.batch_size, a.rng) for a in agents]
        ys = critic_targets(batches, self.target_actors, [a.critic_tgt for a in agents], self.gamma,
                            self.action_table)
        return [update_agent(a, batch, y, n, self.action_table, self.eta)
                for n, a, batch, y in zip(indices, agents, batches, ys)]

    def save(self, checkpoint_dir):
        """Writes agent<n>_<actor|critic>_<est|tgt>.txt for every agent. Returns the file names."""
        files = []
        for n, a in enumerate(self.agents):
            for name, net in [('actor_est', a.actor_est), ('actor_tgt', a.actor_tgt),
                              ('critic_est', a.critic_est), ('critic_tgt', a.critic_tgt)]:
                files.append(nn.save(net, os.path.join(checkpoint_dir, 'agent{}_{}.txt'.format(n, name))))
        return files


def load_target_actors(checkpoint_dir, n_agents):
    """Reads the trained target actors written by :meth:`AgentSet.save`."""
    return [nn.load(os.path.join(checkpoint_dir, 'agent{}_actor_tgt.txt'.format(n))) for n in range(n_agents)]


def observe(env):
    """Local observations of all agents in the current slot of `env`."""
    return [encode_state(v, w, env.config) for v, w in zip(env.vehicles, env.workloads)]


def episode_record(episode, rewards, epsilon, losses, budget_flags):
    return {'episode': episode,
            'mean_reward': float(np.mean(rewards)) if len(rewards) > 0 else float('nan'),
            'epsilon': epsilon,
            'critic_loss_mean': float(np.mean(losses)) if len(losses) > 0 else float('nan'),
            'budget_violation_rate': float(np.mean(budget_flags)) if len(budget_flags) > 0 else float('nan')}


def train(env, agents, episodes, config, logger=None, algo='marl'):
    """
    Centralized training: every slot each agent acts on its own observation, the joint allocation is executed,
    each agent stores its transition and, once its buffer holds a full batch, updates its critic, its actor
    and both target networks. The agents ready in a slot are updated together by :meth:`AgentSet.learn_all`.

    Parameters
    ----------
    env: DT_VEC.env.core.Environment
    agents: AgentSet
    episodes: int
    config: DT_VEC.config.SimConfig
    logger: logging.Logger, optional
    algo: str, optional
        Label used in log messages.

    Returns
    -------
    list[dict]
        One record per episode with the columns of :data:`DT_VEC.metadata.mapping.EPISODE_COLUMNS`.
    """
    history = []
    table = agents.action_table
    for k in range(episodes):
        epsilon = epsilon_at(k, episodes, config)
        agents.epsilon = epsilon
        env.reset()
        rewards, losses, budget_flags = [], [], []
        states = observe(env)
        while not env.done:
            actions = agents.act(states, epsilon)
            outcome = env.step([action_to_allocation(a, config) for a in actions])
            next_states = observe(env)
            joint_state = np.concatenate(states)
            joint_action = np.concatenate([table[a] for a in actions])
            next_joint_state = np.concatenate(next_states)
            for n, agent in enumerate(agents.agents):
                store_transition(agent.buffer, Transition(state=states[n], action=actions[n],
                                                          action_features=table[actions[n]],
                                                          reward=outcome.reward[n], next_state=next_states[n],
                                                          joint_state=joint_state, joint_action=joint_action,
                                                          next_joint_state=next_joint_state, done=env.done))
            losses.extend(agents.learn_all([n for n, agent in enumerate(agents.agents)
                                            if len(agent.buffer) >= config.batch_size]))
            rewards.extend(outcome.reward)
            budget_flags.append(outcome.budget_violated)
            states = next_states
        record = episode_record(k, rewards, epsilon, losses, budget_flags)
        history.append(record)
        agents.episodes_run += 1
        report_episode(logger, algo, agents.seed, k, episodes, record)
    return history


def report_episode(logger, algo, seed, k, episodes, record):
    msg = 'episode {}/{}: mean reward {:.4f}, epsilon {:.3f}, critic loss {:.4f}'.format(
        k + 1, episodes, record['mean_reward'], record['epsilon'], record['critic_loss_mean'])
    milestone = (k + 1) % 100 == 0 or k + 1 == episodes
    if milestone:
        print('###### [  TRAIN] {} | Episode {}/{}: mean reward {:.4f}'.format(algo, k + 1, episodes,
                                                                           record['mean_reward']))
    if logger is not None:
        log(handler=logger, mode='info' if milestone else 'debug', proc_step='TRAIN', algo=algo, seed=seed, msg=msg)


def actor_policy(actors, epsilon, rng):
    """Distributed execution policy: agent n acts on its own observation with actor n only."""
    def policy(env):
        return [action_to_allocation(select_action(actor, s, epsilon, rng), env.config)
                for actor, s in zip(actors, observe(env))]
    return policy


def execute(env, actors, episodes, epsilon, config, rng):
    """
    Evaluation with frozen actors; no parameter or buffer is modified.

    Returns
    -------
    rows: list[dict]
        Trajectory rows.
    outcomes: list[DT_VEC.env.core.StepOutcome]
    """
    if len(actors) != config.n_vehicles:
        raise ValueError('expected one actor per vehicle ({}); got {}'.format(config.n_vehicles, len(actors)))
    return env.rollout(actor_policy(actors, epsilon, rng), episodes)
