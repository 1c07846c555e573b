import pytest
from DT_VEC.config import SimConfig, get_config, convert_value, format_value, REQUIRED_KEYS


def _write(tmp_path, text, name='config.ini'):
    path = tmp_path / name
    path.write_text(text)
    return str(path)


def _lines(config, skip=()):
    return ['{} = {}'.format(k, format_value(v)) for k, v in config.to_dict().items() if k not in skip]


def test_defaults():
    config = SimConfig()
    assert config.n_vehicles == 4
    assert config.twin_bytes_range == (1024.0, 1536.0)
    assert config.capacity_hz == pytest.approx(19.2e9, rel=1e-12)
    assert config.grid_hz == pytest.approx(6e8, rel=1e-12)
    assert config.action_count == 64
    assert config.bs_position == (0.0, 0.0, 10.0)


def test_explicit_capacity_takes_precedence():
    config = SimConfig(server_capacity_hz=10e9)
    assert config.capacity_hz == 10e9
    assert config.grid_hz == pytest.approx(2 * 10e9 / (2 * 4 * 8))


def test_example_config_matches_defaults(example_config_file):
    assert SimConfig.from_dict(get_config(example_config_file)) == SimConfig()


def test_missing_file():
    with pytest.raises(FileNotFoundError):
        get_config('/nonexistent/config.ini')


@pytest.mark.parametrize('key', ['n_vehicles', 'weight_rho', 'levels_per_resource'])
def test_missing_required_key(tmp_path, key):
    assert key in REQUIRED_KEYS
    text = '\n'.join(['[GENERAL]'] + _lines(SimConfig(), skip=[key]))
    with pytest.raises(ValueError, match=key):
        get_config(_write(tmp_path, text))


def test_optional_keys_fall_back_to_defaults(tmp_path):
    text = '\n'.join(['[GENERAL]'] + ['{} = {}'.format(k, format_value(getattr(SimConfig(), k)))
                                       for k in REQUIRED_KEYS])
    config = SimConfig.from_dict(get_config(_write(tmp_path, text)))
    assert config.server_capacity_hz is None
    assert config.large_scale_mode == 'unit'
    assert config.optimizer == 'adam'
    assert config.episodes == 2000


def test_unknown_key(tmp_path):
    text = '\n'.join(['[GENERAL]'] + _lines(SimConfig()) + ['learning_rate = 0.1'])
    with pytest.raises(ValueError, match="'learning_rate' is not allowed"):
        get_config(_write(tmp_path, text))


@pytest.mark.parametrize('key, value, expected', [
    ('weight_rho', '1.5', r'weight_rho.*\(0, 1\).*1.5'),
    ('corr_coeff', '0', r'corr_coeff'),
    ('levels_per_resource', '1', r'levels_per_resource.*>= 2'),
    ('headroom_factor', '0.5', r'headroom_factor.*>= 1'),
    ('tx_power_mw', '300', r'tx_power_mw.*<= tx_power_max_mw'),
    ('noise_mw', '-1e-11', r'noise_mw.*> 0'),
    ('optimizer', 'rmsprop', r'optimizer.*rmsprop'),
    ('n_vehicles', 'four', r'n_vehicles.*integer'),
])
def test_out_of_range_values(tmp_path, key, value, expected):
    text = '\n'.join(['[GENERAL]'] + _lines(SimConfig(), skip=[key]) + ['{} = {}'.format(key, value)])
    with pytest.raises(ValueError, match=expected):
        get_config(_write(tmp_path, text))


def test_file_without_section_header(tmp_path):
    text = '\n'.join(_lines(SimConfig(n_vehicles=3)))
    assert get_config(_write(tmp_path, text))['n_vehicles'] == 3


def test_named_section(tmp_path):
    text = '\n'.join(['[GENERAL]'] + _lines(SimConfig()) + ['[SMALL]'] + _lines(SimConfig(n_vehicles=2)))
    path = _write(tmp_path, text)
    assert get_config(path, section_name='SMALL')['n_vehicles'] == 2
    with pytest.raises(ValueError, match='MISSING'):
        get_config(path, section_name='MISSING')


def test_convert_value():
    assert convert_value('speed_range_mps', '10, 15') == (10.0, 15.0)
    assert convert_value('twin_bytes_range', "'[1024, 1536]'") == (1024.0, 1536.0)
    assert convert_value('fading_innovation', 'True') is True
    assert convert_value('server_capacity_hz', 'None') is None
    assert convert_value('slot_s', format_value(0.1)) == 0.1
    assert isinstance(convert_value('episodes', '10'), int)
    with pytest.raises(ValueError, match='a value is required'):
        convert_value('slot_s', 'None')
    with pytest.raises(ValueError, match='min, max'):
        convert_value('task_bytes_range', '1024')
    with pytest.raises(ValueError, match='fading_innovation'):
        convert_value('fading_innovation', 'maybe')


@pytest.mark.parametrize('changes', [{'n_vehicles': 0}, {'weight_rho': 0.0}, {'gamma': 1.5},
                                     {'speed_range_mps': (15, 10)}, {'large_scale_mode': 'rayleigh'}])
def test_invalid_simconfig(changes):
    with pytest.raises(ValueError):
        SimConfig(**changes)
