import json

import pandas as pd

from cli import instance_files, main, resolve_algorithms


def test_resolve_algorithms():
    assert resolve_algorithms(['fvqe', 'bfs'], 'classical') == ['fvqe-classical', 'bfs']
    assert resolve_algorithms(['vqe', 'vqe-iqp', 'sa'], 'iqp') == ['vqe-iqp', 'sa']


def test_generate_run_analyze(tmp_path, capsys):
    out = str(tmp_path)
    assert main(['generate', '--problem', 'maxcut', '--sizes', '5', '--count', '2', '--out-dir', out]) == 0
    globbed = sorted(str(p) for p in (tmp_path / 'instances').glob('maxcut_N5_s*.json'))
    assert len(globbed) == 4
    assert len(instance_files(globbed)) == 2

    assert main(['run', '--instances', *globbed, '--algorithm', 'bfs', 'sa', '--budget', '20',
                 '--seeds', '2', '--out-dir', out]) == 0
    assert len(list((tmp_path / 'traces').glob('*.json'))) == 8

    assert main(['analyze', '--out-dir', out]) == 0
    frame = pd.read_csv(tmp_path / 'plots' / 'success_table.csv')
    assert set(frame.algorithm) == {'bfs', 'sa'}
    assert 'Analyzed 8 traces' in capsys.readouterr().out


def test_run_with_config_file(tmp_path):
    out = str(tmp_path)
    main(['generate', '--problem', 'atsp', '--sizes', '5', '--out-dir', out])
    config = tmp_path / 'run.cfg'
    config.write_text(f"instance = {tmp_path / 'instances' / 'atsp_N5_s0.json'}\nseed = 4\nbudget = 12\n")
    assert main(['run', '--instances', 'ignored.json', '--algorithm', 'bfs', '--config', str(config),
                 '--out-dir', out]) == 0
    manifest = json.loads((tmp_path / 'manifest.json').read_text())
    (entry,) = manifest['runs'].values()
    assert entry['seed'] == 4 and entry['instance'].endswith('atsp_N5_s0.json')


def test_failed_runs_set_exit_code(tmp_path, capsys):
    assert main(['run', '--instances', str(tmp_path / 'nope.json'), '--algorithm', 'bfs',
                 '--out-dir', str(tmp_path)]) == 1
    assert 'failed 1' in capsys.readouterr().out


def test_spectrum_command(tmp_path):
    out = str(tmp_path)
    main(['generate', '--problem', 'maxcut', '--sizes', '7', '--out-dir', out])
    path = tmp_path / 'instances' / 'maxcut_N7_s0.json'
    assert main(['spectrum', '--instances', str(path), '--out-dir', out]) == 0
    frame = pd.read_csv(tmp_path / 'plots' / 'spectrum.csv')
    assert frame.instance_id.unique().tolist() == ['maxcut_N7_s0']
    assert frame[frame.threshold == 0.0].fraction.tolist() == [1.0]


def test_grads_command_fits_three_sizes(tmp_path):
    assert main(['grads', '--problem', 'maxcut', '--sizes', '3', '5', '7', '--steps', '2',
                 '--out-dir', str(tmp_path)]) == 0
    fits = pd.read_csv(tmp_path / 'plots' / 'gradient_fits.csv')
    assert set(fits.model) <= {'exponential', 'polynomial'}
    assert fits.r2.between(0.0, 1.0).all()
    boxes = pd.read_csv(tmp_path / 'plots' / 'gradient_boxplots.csv')
    assert sorted(boxes.n_bits) == [3, 5, 7]


def test_unknown_problem_size_reports_error(tmp_path, capsys):
    assert main(['generate', '--problem', 'maxcut', '--sizes', '6', '--out-dir', str(tmp_path)]) == 1
    assert '❌' in capsys.readouterr().out
