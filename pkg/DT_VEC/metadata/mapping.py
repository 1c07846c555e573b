# Column order of the per-slot trajectory CSV (one row per vehicle and slot)
TRAJECTORY_COLUMNS = ['episode', 'slot', 'vehicle_id', 'x_m', 'y_m', 'gain', 'rate_bps', 'f_twin_hz', 'f_task_hz',
                      'twin_delay_s', 'task_delay_s', 'utility', 'reward']

# Column order of the per-episode training CSV
EPISODE_COLUMNS = ['episode', 'mean_reward', 'epsilon', 'critic_loss_mean', 'budget_violation_rate']

# Column order of the per-run summary CSV
SUMMARY_COLUMNS = ['algo', 'seed', 'n_vehicles', 'tx_power_mw', 'capacity_hz', 'mean_reward', 'utilization',
                   'conversion_ratio', 'mean_utility', 'mean_twin_delay_s', 'mean_task_delay_s',
                   'twin_violation_rate', 'task_violation_rate', 'budget_violation_rate', 'final_train_reward',
                   'mean_discounted_return']

# summary metrics aggregated (mean and std over seeds) by a sweep
SWEEP_METRICS = ['mean_reward', 'utilization', 'conversion_ratio', 'mean_utility', 'mean_twin_delay_s',
                 'mean_task_delay_s', 'twin_violation_rate', 'task_violation_rate', 'budget_violation_rate']

# parameters a sweep may vary
SWEEP_PARAMS = ['n_vehicles', 'tx_power_mw']

# 'trains': whether the algorithm has a training stage; 'kind': the BaselineKind tag, None for the learner
ALGO_MAP = {'marl': {'trains': True, 'kind': None, 'title': 'MADRL-CSTC'},
            'random': {'trains': False, 'kind': 'random', 'title': 'Random allocation'},
            'equal': {'trains': False, 'kind': 'equal_split', 'title': 'Equal split'},
            'shared': {'trains': True, 'kind': 'shared_single_agent', 'title': 'Shared single-agent actor-critic'}}

# Normalization constants of the local state features, in feature order
FEATURE_MAP = {'twin_bytes': 1536.0,
               'twin_cycles_per_byte': 0.25e6,
               'twin_deadline_s': 0.5,
               'task_bytes': 1536.0,
               'task_cycles_per_byte': 0.25e6,
               'task_deadline_s': 0.5,
               'x_m': 'road_half_len_m',
               'y_m': 'first_lane_offset_m + n_lanes * lane_width_m',
               'speed_mps': 15.0,
               'gain': 'min(log2(1 + gain / reference gain at 100 m), 4)'}

# Output file names of a run directory
FILE_MAP = {'episodes': 'episodes.csv',
            'trajectory': 'trajectory.csv',
            'summary': 'summary.csv',
            'manifest': 'manifest.xml',
            'checkpoint': 'checkpoint',
            'log': 'LOG'}

# seed streams derived from the run seed
STREAM_NAMES = ['env_train', 'env_eval', 'networks', 'policy']

NS_MAP = {'dt': 'urn:dt-vec:run-manifest:1.0'}
