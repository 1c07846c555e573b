import os
import pytest
from DT_VEC.config import SimConfig, format_value

# small scenario: two vehicles, four actions per agent, five-slot episodes
TINY = {'n_vehicles': 2,
        'levels_per_resource': 2,
        'episode_slots': 5,
        'episodes': 2,
        'eval_episodes': 2,
        'batch_size': 4,
        'buffer_capacity': 50}


@pytest.fixture
def tiny_config():
    return SimConfig(**TINY)


def write_config(path, config, section='GENERAL'):
    """Writes every field of `config` as an INI file readable by DT_VEC.config.get_config."""
    lines = ['[{}]'.format(section)]
    for k, v in config.to_dict().items():
        lines.append('{} = {}'.format(k, format_value(v)))
    with open(path, 'w') as f:
        f.write('\n'.join(lines) + '\n')
    return str(path)


@pytest.fixture
def tiny_config_file(tmp_path, tiny_config):
    return write_config(tmp_path / 'config.ini', tiny_config)


@pytest.fixture
def example_config_file():
    return os.path.join(os.path.dirname(os.path.dirname(os.path.abspath(__file__))), 'config.ini')
