import os
import configparser
from dataclasses import dataclass, fields, asdict

# keys that must be present in a configuration file; all other SimConfig fields are optional
REQUIRED_KEYS = ['n_vehicles', 'n_lanes', 'lane_width_m', 'first_lane_offset_m', 'slot_s', 'bandwidth_hz',
                 'noise_mw', 'tx_power_mw', 'tx_power_max_mw', 'corr_coeff', 'pathloss_exp',
                 'bs_antenna_height_m', 'weight_rho', 'twin_bytes_range', 'task_bytes_range',
                 'cycles_per_byte_hz', 'deadline_s', 'speed_range_mps', 'vehicle_density_per_m',
                 'road_half_len_m', 'levels_per_resource', 'headroom_factor', 'penalty_budget',
                 'penalty_deadline', 'episode_slots']

LARGE_SCALE_MODES = ['unit', 'log-normal-shadowing']
OPTIMIZERS = ['adam', 'sgd']


@dataclass(frozen=True)
class SimConfig:
    """
    All scenario and learning parameters of a simulation run. Units are SI unless the field name says
    otherwise (`_mw` milliwatts, `_db` decibel). Defaults reproduce the experimental settings of the
    reference scenario (three lanes, 150 MHz, 1e-11 mW noise, [1024, 1536] byte payloads, 0.25 MHz/byte,
    0.5 s deadlines, [10, 15] m/s, kappa 0.2, beta 3, rho 0.5).

    `server_capacity_hz` may be None, in which case F is derived from the fleet size (see `capacity_hz`).
    """
    n_vehicles: int = 4
    n_lanes: int = 3
    lane_width_m: float = 4.0
    first_lane_offset_m: float = 10.0
    slot_s: float = 0.1
    bandwidth_hz: float = 150e6
    noise_mw: float = 1e-11
    tx_power_mw: float = 200.0
    tx_power_max_mw: float = 200.0
    corr_coeff: float = 0.2
    pathloss_exp: float = 3.0
    bs_antenna_height_m: float = 10.0
    server_capacity_hz: float = None
    weight_rho: float = 0.5
    twin_bytes_range: tuple = (1024.0, 1536.0)
    task_bytes_range: tuple = (1024.0, 1536.0)
    cycles_per_byte_hz: float = 0.25e6
    deadline_s: float = 0.5
    speed_range_mps: tuple = (10.0, 15.0)
    vehicle_density_per_m: float = 0.02
    road_half_len_m: float = 250.0
    levels_per_resource: int = 8
    headroom_factor: float = 2.0
    penalty_budget: float = 1.0
    penalty_deadline: float = 0.5
    episode_slots: int = 100
    large_scale_mode: str = 'unit'
    shadowing_sigma_db: float = 8.0
    fading_innovation: bool = False
    gamma: float = 0.95
    eta: float = 0.01
    lr_actor: float = 2e-4
    lr_critic: float = 1e-3
    optimizer: str = 'adam'
    batch_size: int = 64
    buffer_capacity: int = 5000
    episodes: int = 2000
    eval_episodes: int = 20
    epsilon_start: float = 1.0
    epsilon_end: float = 0.05
    epsilon_decay_fraction: float = 0.6
    eval_epsilon: float = 0.0
    q_scale: float = 20.0
    logit_scale: float = 10.0

    def __post_init__(self):
        for k in ['twin_bytes_range', 'task_bytes_range', 'speed_range_mps']:
            object.__setattr__(self, k, tuple(float(x) for x in getattr(self, k)))
        _validate(asdict(self))

    @classmethod
    def from_dict(cls, config):
        """Build a SimConfig from a (possibly partial) dictionary as returned by :func:`get_config`."""
        names = [f.name for f in fields(cls)]
        unknown = [k for k in config.keys() if k not in names]
        if len(unknown) > 0:
            raise ValueError("Parameter '{}' is not allowed; should be one of {}".format(unknown[0], names))
        return cls(**config)

    def to_dict(self):
        return asdict(self)

    @property
    def capacity_hz(self):
        """
        Server CPU capacity F. Unless configured explicitly, F is sized 25% above the load at which every
        vehicle meets both deadlines with the maximum payload: N*(N+1)*D_max*C/T.
        """
        if self.server_capacity_hz is not None:
            return self.server_capacity_hz
        d_max = max(self.twin_bytes_range[1], self.task_bytes_range[1])
        need = self.n_vehicles * (self.n_vehicles + 1) * d_max * self.cycles_per_byte_hz / self.deadline_s
        return 1.25 * need

    @property
    def grid_hz(self):
        """Action quantization step c*F/(2*N*L)."""
        return self.headroom_factor * self.capacity_hz / (2 * self.n_vehicles * self.levels_per_resource)

    @property
    def action_count(self):
        return self.levels_per_resource ** 2

    @property
    def bs_position(self):
        return 0.0, 0.0, self.bs_antenna_height_m


def _positive(k, v):
    if not v > 0:
        raise ValueError("Parameter '{}': expected a value > 0; got '{}' instead".format(k, v))


def _interval(k, v, low, high, closed=True):
    ok = low <= v <= high if closed else low < v < high
    if not ok:
        brackets = '[{}, {}]' if closed else '({}, {})'
        raise ValueError("Parameter '{}': expected a value in {}; got '{}' instead"
                         .format(k, brackets.format(low, high), v))


def _validate(c):
    """Check the SimConfig invariants on a complete parameter dictionary."""
    for k in ['n_vehicles', 'n_lanes', 'lane_width_m', 'first_lane_offset_m', 'slot_s', 'bandwidth_hz',
              'noise_mw', 'tx_power_mw', 'tx_power_max_mw', 'corr_coeff', 'pathloss_exp', 'bs_antenna_height_m',
              'cycles_per_byte_hz', 'deadline_s', 'vehicle_density_per_m', 'road_half_len_m',
              'episode_slots', 'eval_episodes', 'shadowing_sigma_db', 'batch_size', 'buffer_capacity', 'q_scale',
              'logit_scale']:
        _positive(k, c[k])
    if c['server_capacity_hz'] is not None:
        _positive('server_capacity_hz', c['server_capacity_hz'])
    for k in ['penalty_budget', 'penalty_deadline', 'episodes', 'lr_actor', 'lr_critic']:
        if c[k] < 0:
            raise ValueError("Parameter '{}': expected a value >= 0; got '{}' instead".format(k, c[k]))
    for k in ['twin_bytes_range', 'task_bytes_range', 'speed_range_mps']:
        low, high = c[k]
        if not 0 < low <= high:
            raise ValueError("Parameter '{}': expected 'min, max' with 0 < min <= max; got '{}' instead"
                             .format(k, c[k]))
    _interval('weight_rho', c['weight_rho'], 0, 1, closed=False)
    _interval('corr_coeff', c['corr_coeff'], 0, 1, closed=False)
    for k in ['gamma', 'eta', 'epsilon_start', 'epsilon_end', 'epsilon_decay_fraction', 'eval_epsilon']:
        _interval(k, c[k], 0, 1)
    if c['tx_power_mw'] > c['tx_power_max_mw']:
        raise ValueError("Parameter 'tx_power_mw': expected a value <= tx_power_max_mw ({}); got '{}' instead"
                         .format(c['tx_power_max_mw'], c['tx_power_mw']))
    if c['levels_per_resource'] < 2:
        raise ValueError("Parameter 'levels_per_resource': expected a value >= 2; got '{}' instead"
                         .format(c['levels_per_resource']))
    if c['headroom_factor'] < 1:
        raise ValueError("Parameter 'headroom_factor': expected a value >= 1; got '{}' instead"
                         .format(c['headroom_factor']))
    if c['large_scale_mode'] not in LARGE_SCALE_MODES:
        raise ValueError("Parameter 'large_scale_mode': expected to be one of {}; got '{}' instead"
                         .format(LARGE_SCALE_MODES, c['large_scale_mode']))
    if c['optimizer'] not in OPTIMIZERS:
        raise ValueError("Parameter 'optimizer': expected to be one of {}; got '{}' instead"
                         .format(OPTIMIZERS, c['optimizer']))


def get_config(config_file, section_name='GENERAL'):
    """Returns the content of a config file as a dictionary.

    Parameters
    ----------
    config_file: str
        Full path to the config file that should be parsed to a dictionary. Files without a section header
        are read as if all lines belonged to section `section_name`.
    section_name: str, optional
        Section name of the config file that parameters should be parsed from. Default is 'GENERAL'.

    Returns
    -------
    out_dict: dict
        Dictionary of the parsed config parameters, typed and validated.
    """
    if not os.path.isfile(config_file):
        raise FileNotFoundError("Config file {} does not exist.".format(config_file))

    parser = configparser.ConfigParser(allow_no_value=True)
    with open(config_file, 'r') as f:
        content = f.read()
    if not any(line.strip().startswith('[') for line in content.splitlines()):
        content = '[{}]\n'.format(section_name) + content
    parser.read_string(content)
    if section_name not in parser:
        raise ValueError("Section '{}' not found in config file {}".format(section_name, config_file))
    parser_sec = parser[section_name]

    out_dict = {}
    for k, v in parser_sec.items():
        out_dict[k] = convert_value(k, v)

    for k in REQUIRED_KEYS:
        if k not in out_dict.keys():
            raise ValueError("Parameter '{}' is required but missing in config file {}".format(k, config_file))

    # full invariant check on the merged parameters
    SimConfig.from_dict(out_dict)
    return out_dict


def convert_value(k, v):
    """
    Converts the text value of parameter `k` (as found in a config file or run manifest) to its SimConfig type.

    Parameters
    ----------
    k: str
        Parameter name.
    v: str
        Raw text value.

    Returns
    -------
    int or float or str or bool or tuple or None
    """
    types = {f.name: f.type for f in fields(SimConfig)}
    if k not in types.keys():
        raise ValueError("Parameter '{}' is not allowed; should be one of {}".format(k, list(types.keys())))
    v = _val_cleanup(v or '').strip()
    if v in ['None', 'none', '']:
        if k != 'server_capacity_hz':
            raise ValueError("Parameter '{}': a value is required".format(k))
        return None
    if k.endswith('_range') or k.endswith('_range_mps'):
        return _parse_range(v)
    elif k == 'fading_innovation':
        if v.lower() == 'true':
            return True
        elif v.lower() == 'false':
            return False
        allowed = ['True', 'true', 'False', 'false']
        raise ValueError("Parameter '{}': expected to be one of {}; got '{}' instead".format(k, allowed, v))
    elif types[k] == int:
        try:
            return int(v)
        except ValueError as e:
            raise ValueError("Parameter '{}': expected an integer; got '{}' instead".format(k, v)) from e
    elif types[k] == float:
        try:
            return float(v)
        except ValueError as e:
            raise ValueError("Parameter '{}': expected a number; got '{}' instead".format(k, v)) from e
    return v


def format_value(v):
    """Text form of a SimConfig value that :func:`convert_value` reads back exactly."""
    if isinstance(v, tuple):
        return ', '.join(repr(float(x)) for x in v)
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _parse_range(s):
    """Custom converter for configparser:
    https://docs.python.org/3/library/configparser.html#customizing-parser-behaviour"""
    items = s.replace('[', '').replace(']', '').replace(' ', '').split(',')
    if len(items) != 2:
        raise ValueError("Error while parsing range '{}'; expected format 'min, max'".format(s))
    try:
        return float(items[0]), float(items[1])
    except ValueError as e:
        raise ValueError("Error while parsing range '{}'; values must be numbers".format(s)) from e


def _val_cleanup(val):
    """Helper function to clean up value strings while parsing a config file."""
    return val.replace('"', '').replace("'", "")
