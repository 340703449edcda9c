import logging

import pytest

from config import Settings, configure_logging, get_settings, load_run_config, parse_run_config


def test_parse_json_run_config():
    config = parse_run_config('{"instance": "a.json", "seed": "3", "tau": 2, "record_exact": true}')
    assert config == {'instance': 'a.json', 'seed': 3, 'tau': 2.0, 'record_exact': True}


def test_parse_key_value_run_config_with_comments():
    text = """
    # sweep for one instance
    instance = runs/instances/maxcut_N7_s0.json
    ansatz = classical   # mirror
    steps = 50
    learning_rate = 0.3
    record_exact = yes
    """
    config = parse_run_config(text)
    assert config['instance'] == 'runs/instances/maxcut_N7_s0.json'
    assert config['ansatz'] == 'classical'
    assert config['steps'] == 50
    assert config['learning_rate'] == 0.3
    assert config['record_exact'] is True


def test_run_config_errors():
    with pytest.raises(ValueError, match='Unknown run config keys'):
        parse_run_config('colour = blue')
    with pytest.raises(ValueError, match='steps'):
        parse_run_config('steps = many')
    with pytest.raises(ValueError, match='not key=value'):
        parse_run_config('steps 5')
    with pytest.raises(ValueError, match='record_exact'):
        parse_run_config('record_exact = maybe')


def test_load_run_config(tmp_path):
    path = tmp_path / 'run.cfg'
    path.write_text('preset = hp1\nseed = 9\n')
    assert load_run_config(str(path)) == {'preset': 'hp1', 'seed': 9}


def test_settings_from_environment(monkeypatch):
    monkeypatch.setenv('FVQE_SIMULATOR_CAP', '12')
    monkeypatch.setenv('FVQE_JOBS', '4')
    monkeypatch.setenv('FVQE_LOG_LEVEL', 'debug')
    settings = get_settings()
    assert settings.simulator_cap == 12
    assert settings.jobs == 4
    assert settings.log_level == 'DEBUG'
    assert settings.exact_cap == Settings().exact_cap


def test_settings_reject_bad_integers(monkeypatch):
    monkeypatch.setenv('FVQE_EXACT_CAP', 'twenty')
    with pytest.raises(ValueError, match='FVQE_EXACT_CAP'):
        get_settings()


def test_configure_logging_writes_log_file(tmp_path):
    log_file = tmp_path / 'fvqe.log'
    configure_logging(Settings(log_file=str(log_file), log_level='INFO'))
    logging.getLogger('fvqe.test').info('hello from the test')
    for handler in logging.getLogger().handlers:
        handler.flush()
    assert 'hello from the test' in log_file.read_text()
    configure_logging(Settings(log_file=''))
