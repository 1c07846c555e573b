import os
import time
from dataclasses import dataclass, replace
from concurrent.futures import ProcessPoolExecutor
import numpy as np
import pandas as pd
from DT_VEC import nn
from DT_VEC.config import SimConfig, get_config, convert_value
from DT_VEC.ancillary import set_logging, log, derive_seed, write_csv
from DT_VEC.env.core import Environment, discounted_return
from DT_VEC.agents import AgentSet, train, execute
from DT_VEC.baselines import baseline_policy, shared_actors, shared_single_agent_train
from DT_VEC.metadata.manifest import write_manifest, read_manifest
from DT_VEC.metadata.mapping import (ALGO_MAP, EPISODE_COLUMNS, FILE_MAP, STREAM_NAMES, SUMMARY_COLUMNS,
                                     SWEEP_METRICS, SWEEP_PARAMS, TRAJECTORY_COLUMNS)

# number of final training episodes averaged into `final_train_reward`
FINAL_EPISODES = 100


@dataclass
class MetricsSummary:
    """
    Aggregated evaluation metrics. Means are arithmetic means over trajectory rows (vehicle-slots) unless
    stated otherwise; `utilization` holds one value per slot. `mean_discounted_return` averages the discounted
    reward sums of every vehicle and episode.
    """
    mean_reward_curve: list
    utilization: list
    mean_utilization: float
    conversion_ratio: float
    mean_utility_per_vehicle: float
    mean_twin_delay_s: float
    mean_task_delay_s: float
    twin_violation_rate: float
    task_violation_rate: float
    mean_reward: float
    mean_discounted_return: float
    rows: int


def load_config(config_file, section_name='GENERAL'):
    """
    Reads a configuration file or a run manifest.

    Returns
    -------
    config: DT_VEC.config.SimConfig
    algo: str or None
        The algorithm recorded in a manifest, None for configuration files.
    seed: int or None
        The seed recorded in a manifest, None for configuration files.
    """
    if config_file.lower().endswith('.xml'):
        config, algo, seed = read_manifest(config_file)
        return SimConfig.from_dict(config), algo, seed
    return SimConfig.from_dict(get_config(config_file=config_file, section_name=section_name)), None, None


def stream_seeds(seed):
    return {name: derive_seed(seed, name) for name in STREAM_NAMES}


def _final_reward(history):
    if len(history) == 0:
        return float('nan')
    return float(np.mean([r['mean_reward'] for r in history[-FINAL_EPISODES:]]))


def run_config(config, algo, seed, out_dir, logger=None):
    """
    Trains (if the algorithm learns), evaluates and writes all outputs of one run into `out_dir`.

    Parameters
    ----------
    config: DT_VEC.config.SimConfig
    algo: str
        One of the keys of :data:`DT_VEC.metadata.mapping.ALGO_MAP`.
    seed: int
    out_dir: str
    logger: logging.Logger, optional

    Returns
    -------
    dict
        The summary row.
    """
    if algo not in ALGO_MAP.keys():
        raise ValueError("algorithm '{}' is not supported; should be one of {}".format(algo, list(ALGO_MAP.keys())))
    os.makedirs(out_dir, exist_ok=True)
    streams = stream_seeds(seed)
    checkpoint_dir = os.path.join(out_dir, FILE_MAP['checkpoint'])
    policy_rng = np.random.default_rng(streams['policy'])
    history = []
    schedule = {'episodes_run': 0}
    start_time = time.time()
    ####################################################################################################################
    # training
    if algo == 'marl':
        agents = AgentSet(config, streams['networks'])
        history = train(Environment(config, streams['env_train']), agents, config.episodes, config,
                        logger=logger, algo=algo)
        agents.save(checkpoint_dir)
        actors = agents.target_actors
        schedule = {'episodes_run': agents.episodes_run, 'epsilon': agents.epsilon}
    elif algo == 'shared':
        agent, history = shared_single_agent_train(Environment(config, streams['env_train']), config,
                                                   config.episodes, streams['networks'], logger=logger)
        for name in ['actor_est', 'actor_tgt', 'critic_est', 'critic_tgt']:
            nn.save(getattr(agent, name), os.path.join(checkpoint_dir, 'shared_{}.txt'.format(name)))
        actors = shared_actors(agent, config)
        schedule = {'episodes_run': len(history), 'epsilon': history[-1]['epsilon'] if history else None}
    else:
        policy = baseline_policy(ALGO_MAP[algo]['kind'], config, policy_rng)
    if logger is not None and ALGO_MAP[algo]['trains']:
        log(handler=logger, mode='info', proc_step='TRAIN', algo=algo, seed=seed,
            msg='{} episodes in {} s'.format(len(history), round(time.time() - start_time, 2)))
    ####################################################################################################################
    # evaluation
    print('###### [   EVAL] {} | seed {}: {} episodes'.format(algo, seed, config.eval_episodes))
    eval_env = Environment(config, streams['env_eval'])
    if ALGO_MAP[algo]['trains']:
        rows, outcomes = execute(eval_env, actors, config.eval_episodes, config.eval_epsilon, config, policy_rng)
    else:
        rows, outcomes = eval_env.rollout(policy, config.eval_episodes)
    budget_rate = float(np.mean([o.budget_violated for o in outcomes])) if outcomes else float('nan')
    ####################################################################################################################
    # outputs
    files = {}
    files['episodes'] = os.path.basename(write_csv(pd.DataFrame(history, columns=EPISODE_COLUMNS),
                                                   os.path.join(out_dir, FILE_MAP['episodes'])))
    traj_file = write_csv(pd.DataFrame(rows, columns=TRAJECTORY_COLUMNS), os.path.join(out_dir, FILE_MAP['trajectory']))
    files['trajectory'] = os.path.basename(traj_file)

    metrics = summarize([traj_file], config)
    row = summary_row(metrics, config, algo, seed, budget_rate, _final_reward(history))
    files['summary'] = os.path.basename(write_csv(pd.DataFrame([row], columns=SUMMARY_COLUMNS),
                                                  os.path.join(out_dir, FILE_MAP['summary'])))
    if os.path.isdir(checkpoint_dir):
        for name in sorted(os.listdir(checkpoint_dir)):
            files['checkpoint:{}'.format(os.path.splitext(name)[0])] = os.path.join(FILE_MAP['checkpoint'], name)
    write_manifest(os.path.join(out_dir, FILE_MAP['manifest']), config, algo, seed, streams, schedule, files)
    if logger is not None:
        log(handler=logger, mode='info', proc_step='EVAL', algo=algo, seed=seed,
            msg='mean reward {:.4f}, utilization {:.4f}, mean utility {:.4f}'.format(
                row['mean_reward'], row['utilization'], row['mean_utility']))
    return row


def summary_row(metrics, config, algo, seed, budget_violation_rate, final_train_reward):
    values = [algo, seed, config.n_vehicles, config.tx_power_mw, config.capacity_hz, metrics.mean_reward,
              metrics.mean_utilization, metrics.conversion_ratio, metrics.mean_utility_per_vehicle,
              metrics.mean_twin_delay_s, metrics.mean_task_delay_s, metrics.twin_violation_rate,
              metrics.task_violation_rate, budget_violation_rate, final_train_reward,
              metrics.mean_discounted_return]
    return dict(zip(SUMMARY_COLUMNS, values))


def run(config_file, algo=None, seed=None, out_dir='.', section_name='GENERAL', debug=False):
    """
    Runs one algorithm on one seed. `config_file` may also be the manifest of an earlier run, in which case
    its configuration, algorithm and seed are reused unless `algo` or `seed` are given.

    Returns
    -------
    dict
        The summary row.
    """
    config, manifest_algo, manifest_seed = load_config(config_file, section_name)
    algo = algo if algo is not None else manifest_algo
    seed = seed if seed is not None else (manifest_seed if manifest_seed is not None else 0)
    if algo is None:
        raise ValueError('an algorithm must be given; should be one of {}'.format(list(ALGO_MAP.keys())))
    logger = set_logging(os.path.join(out_dir, FILE_MAP['log']), config, debug=debug)
    try:
        return run_config(config, algo, seed, out_dir, logger=logger)
    except Exception as e:
        log(handler=logger, mode='exception', proc_step='RUN', algo=algo, seed=seed, msg=e)
        raise


def cell_config(base, param, value):
    """The configuration of one sweep cell."""
    if param not in SWEEP_PARAMS:
        raise ValueError("sweep parameter '{}' is not supported; should be one of {}".format(param, SWEEP_PARAMS))
    if param == 'tx_power_mw':
        return replace(base, tx_power_mw=float(value), tx_power_max_mw=float(value))
    return replace(base, n_vehicles=int(value))


def _run_cell(cell):
    config, algo, seed, out_dir = cell
    return run_config(config, algo, seed, out_dir)


def sweep(config_file, param, values, seeds, algos, out_dir, base_seed=0, section_name='GENERAL', workers=1,
          debug=False):
    """
    Runs every (value, seed, algorithm) cell of a parameter sweep and aggregates the summaries.

    Parameters
    ----------
    config_file: str
    param: str
        'n_vehicles' or 'tx_power_mw'. When the fleet size is swept, the server capacity of the base
        configuration is kept for all cells.
    values: list
    seeds: list[int]
        Replicate indices; the seed of a cell is derived from (base_seed, value, replicate).
    algos: list[str]
    out_dir: str
    base_seed: int, optional
    section_name: str, optional
    workers: int, optional
        Number of worker processes.
    debug: bool, optional

    Returns
    -------
    pandas.DataFrame
        Mean and standard deviation over seeds of every summary metric per (value, algorithm).
    """
    if len(values) == 0 or len(seeds) == 0 or len(algos) == 0:
        raise ValueError('a sweep requires at least one value, one seed and one algorithm')
    base, _, _ = load_config(config_file, section_name)
    if param == 'n_vehicles':
        base = replace(base, server_capacity_hz=base.capacity_hz)
    values = [convert_value(param, str(v)) for v in values]
    logger = set_logging(os.path.join(out_dir, FILE_MAP['log']), base, debug=debug)

    cells = []
    keys = []
    for value in values:
        config = cell_config(base, param, value)
        for replicate in seeds:
            seed = derive_seed(base_seed, value, replicate)
            for algo in algos:
                cell_dir = os.path.join(out_dir, '{}_{}'.format(param, value), algo, 'seed{}'.format(replicate))
                cells.append((config, algo, seed, cell_dir))
                keys.append((value, replicate, algo))

    rows = []
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as executor:
            futures = [executor.submit(_run_cell, cell) for cell in cells]
            for key, cell, future in zip(keys, cells, futures):
                rows.append(_collect(logger, key, cell, future.result))
    else:
        for key, cell in zip(keys, cells):
            rows.append(_collect(logger, key, cell, lambda: _run_cell(cell)))

    table = pd.DataFrame(rows)
    table.insert(0, 'replicate', [k[1] for k in keys])
    table.insert(0, param + '_value', [k[0] for k in keys])
    write_csv(table, os.path.join(out_dir, 'cells.csv'))
    aggregated = aggregate(table, param)
    write_csv(aggregated, os.path.join(out_dir, 'sweep.csv'))
    return aggregated


def _collect(logger, key, cell, result):
    value, replicate, algo = key
    try:
        row = result()
    except Exception as e:
        log(handler=logger, mode='exception', proc_step='SWEEP', algo=algo, seed=cell[2],
            msg='cell value {} replicate {} failed: {}'.format(value, replicate, e))
        raise
    log(handler=logger, mode='info', proc_step='SWEEP', algo=algo, seed=cell[2],
        msg='cell value {} replicate {}: mean utility {:.4f}'.format(value, replicate, row['mean_utility']))
    return row


def aggregate(table, param):
    """Mean and population standard deviation of the sweep metrics per (swept value, algorithm)."""
    group = table.groupby([param + '_value', 'algo'], sort=False)[SWEEP_METRICS]
    mean = group.mean().add_suffix('_mean')
    std = group.std(ddof=0).add_suffix('_std')
    out = pd.concat([mean, std], axis=1)
    out.insert(0, 'n_seeds', group.size())
    columns = ['n_seeds'] + [c for m in SWEEP_METRICS for c in (m + '_mean', m + '_std')]
    return out[columns].reset_index()


def summarize(trajectory_files, config):
    """
    Aggregates trajectory CSVs. Rows of different files never share a slot.

    Parameters
    ----------
    trajectory_files: list[str]
    config: DT_VEC.config.SimConfig
        Provides the server capacity and the deadline.

    Returns
    -------
    MetricsSummary
    """
    frames = []
    for i, filename in enumerate(trajectory_files):
        frame = pd.read_csv(filename, float_precision='round_trip')
        if list(frame.columns) != TRAJECTORY_COLUMNS:
            raise ValueError('schema mismatch in {}: expected columns {}; got {}'
                             .format(filename, TRAJECTORY_COLUMNS, list(frame.columns)))
        frame.insert(0, 'source', i)
        frames.append(frame)
    if len(frames) == 0:
        raise ValueError('no trajectory files given')
    data = pd.concat(frames, ignore_index=True)
    if len(data) == 0:
        raise ValueError('the trajectory files contain no rows')

    granted = data['f_twin_hz'] + data['f_task_hz']
    per_slot = granted.groupby([data['source'], data['episode'], data['slot']], sort=False).sum()
    utilization = np.minimum(per_slot.to_numpy() / config.capacity_hz, 1.0)
    curve = data.groupby(['source', 'episode'], sort=False)['reward'].mean()
    ordered = data.sort_values('slot', kind='stable')
    returns = ordered.groupby(['source', 'episode', 'vehicle_id'], sort=False)['reward']
    discounted = [discounted_return(r.tolist(), config.gamma) for _, r in returns]
    return MetricsSummary(mean_reward_curve=curve.tolist(),
                          utilization=utilization.tolist(),
                          mean_utilization=float(np.mean(utilization)),
                          conversion_ratio=float(data['utility'].sum() / (granted.sum() / 1e9)),
                          mean_utility_per_vehicle=float(data['utility'].mean()),
                          mean_twin_delay_s=float(data['twin_delay_s'].mean()),
                          mean_task_delay_s=float(data['task_delay_s'].mean()),
                          twin_violation_rate=float((data['twin_delay_s'] > config.deadline_s).mean()),
                          task_violation_rate=float((data['task_delay_s'] > config.deadline_s).mean()),
                          mean_reward=float(data['reward'].mean()),
                          mean_discounted_return=float(np.mean(discounted)),
                          rows=len(data))
