import json

import numpy as np
import pytest

from glmotion.cli import SEED_NAME, run
from glmotion.config import RESOLVED_NAME
from glmotion.model.checkpoint import read_header
from glmotion.sequence_io import read_dataset

SMALL_NETWORK = ['--set', 't_max=16', '--set', 'embed_dim=4', '--set', 'blocks=1', '--set', 'temporal_heads=2']


@pytest.fixture
def synth_dir(tmp_path):
    out = tmp_path / 'synth'
    code = run(['synth', '--out', str(out), '--classes', '2', '--per-class', '3', '--joints', '4',
                '--min-frames', '6', '--max-frames', '8'])
    assert code == 0
    return out


@pytest.fixture
def pretrained(synth_dir, tmp_path):
    out = tmp_path / 'run'
    code = run(['pretrain', '--data', str(synth_dir), '--out', str(out), '--epochs', '1', '--intervals', '1']
               + SMALL_NETWORK)
    assert code == 0
    return out


class TestSynth:
    def test_split_per_class(self, synth_dir):
        train, test = read_dataset(synth_dir), read_dataset(synth_dir / 'test')
        assert len(train) == 6
        assert len(test) == 2
        assert sorted(s.label for s in test) == [0, 1]
        assert {s.joints for s in train} == {4}

    def test_random_phase(self, tmp_path):
        args = ['synth', '--classes', '2', '--per-class', '2', '--joints', '4', '--min-frames', '6',
                '--max-frames', '6', '--noise', '0']
        assert run(args + ['--out', str(tmp_path / 'fixed')]) == 0
        assert run(args + ['--out', str(tmp_path / 'drawn'), '--random-phase']) == 0
        fixed, drawn = read_dataset(tmp_path / 'fixed'), read_dataset(tmp_path / 'drawn')
        local = [s.coords[:, 0] - s.coords[:, 0, :1] for s in fixed[:2] + drawn[:2]]
        assert np.allclose(local[0], local[1])
        assert not np.allclose(local[2], local[3])



class TestPretrain:
    def test_run_directory(self, pretrained):
        assert (pretrained / RESOLVED_NAME).is_file()
        assert (pretrained / SEED_NAME).read_text() == '0\n'
        header = read_header(pretrained / 'checkpoint.npz')
        assert header['head_count'] == 2
        assert header['meta']['epoch'] == 1

    def test_default_intervals(self, synth_dir, tmp_path):
        out = tmp_path / 'run3'
        assert run(['pretrain', '--data', str(synth_dir), '--out', str(out), '--epochs', '1', '--seed', '4']
                   + SMALL_NETWORK) == 0
        assert read_header(out / 'checkpoint.npz')['head_count'] == 6
        assert (out / SEED_NAME).read_text() == '4\n'

    def test_default_settings_reproduce_log(self, synth_dir, tmp_path):
        for name in ('a', 'b'):
            assert run(['pretrain', '--data', str(synth_dir), '--out', str(tmp_path / name), '--epochs', '2',
                        '--intervals', '1'] + SMALL_NETWORK) == 0
        first = (tmp_path / 'a' / 'metrics.log').read_bytes()
        assert first == (tmp_path / 'b' / 'metrics.log').read_bytes()
        assert all(line.endswith(b', 0') for line in first.splitlines()[1:])

    def test_records_disentangle_mode(self, pretrained):
        assert read_header(pretrained / 'checkpoint.npz')['meta']['disentangle_mode'] == 'global_local'

    def test_missing_data(self, tmp_path):
        assert run(['pretrain', '--data', str(tmp_path / 'nowhere'), '--out', str(tmp_path / 'run')]) == 2

    def test_bad_setting(self, synth_dir, tmp_path):
        assert run(['pretrain', '--data', str(synth_dir), '--out', str(tmp_path / 'run'),
                    '--set', 'learning_rate=1']) == 2

    def test_malformed_set(self, synth_dir, tmp_path):
        assert run(['pretrain', '--data', str(synth_dir), '--out', str(tmp_path / 'run'), '--set', 'epochs']) == 1


class TestUsage:
    def test_unknown_subcommand(self, capsys):
        assert run(['train']) == 1
        assert 'usage' in capsys.readouterr().err

    def test_no_subcommand(self):
        assert run([]) == 1

    def test_probe_needs_a_backbone(self, synth_dir):
        assert run(['probe', '--data', str(synth_dir), '--test-data', str(synth_dir / 'test')]) == 1


class TestEvaluate:
    def test_probe_random_backbone(self, synth_dir, tmp_path):
        out = tmp_path / 'probe'
        code = run(['probe', '--data', str(synth_dir), '--test-data', str(synth_dir / 'test'), '--random-backbone',
                    '--out', str(out), '--set', 'probe_epochs=2'] + SMALL_NETWORK)
        assert code == 0
        summary = json.loads((out / 'probe.json').read_text())
        assert summary['backbone'] == 'random'
        assert summary['n_classes'] == 2
        assert 0.0 <= summary['accuracy'] <= 1.0

    def test_finetune_from_checkpoint(self, synth_dir, pretrained, tmp_path):
        out = tmp_path / 'finetune'
        code = run(['finetune', '--data', str(synth_dir), '--test-data', str(synth_dir / 'test'),
                    '--checkpoint', str(pretrained / 'checkpoint.npz'), '--out', str(out),
                    '--set', 'finetune_epochs=1', '--label-fraction', '1.0'])
        assert code == 0
        summary = json.loads((out / 'finetune.json').read_text())
        assert summary['n_train'] == 6
        assert summary['label_fraction'] == 1.0


class TestImportAndAnalyze:
    def test_import_ntu(self, fixtures_dir, tmp_path):
        out = tmp_path / 'ntu'
        assert run(['import-ntu', str(fixtures_dir), '--out', str(out)]) == 0
        assert [s.label for s in read_dataset(out)] == [6, 49]

    def test_import_nothing(self, tmp_path):
        assert run(['import-ntu', str(tmp_path), '--out', str(tmp_path / 'ntu')]) == 2

    def test_analyze(self, synth_dir, pretrained, tmp_path):
        out = tmp_path / 'analysis'
        code = run(['analyze', '--data', str(synth_dir), '--checkpoint', str(pretrained / 'checkpoint.npz'),
                    '--out', str(out), '--samples', '4', '--no-svg'])
        assert code == 0
        assert (out / 'attention' / 'distances.csv').is_file()
        assert (out / 'attention' / 'temporal_b0_h1.csv').is_file()
        assert (out / 'posemb' / 'posemb_t000_j00.csv').is_file()
        assert not list(out.rglob('*.svg'))

    def test_analyze_uses_recorded_disentangle_mode(self, synth_dir, tmp_path):
        ckpt = tmp_path / 'pretrained_entangled' / 'checkpoint.npz'
        assert run(['pretrain', '--data', str(synth_dir), '--out', str(ckpt.parent), '--epochs', '1',
                    '--intervals', '1', '--set', 'disentangle_mode=entangled'] + SMALL_NETWORK) == 0
        assert read_header(ckpt)['meta']['disentangle_mode'] == 'entangled'
        tables = []
        for name, extra in (('plain', []), ('entangled', ['--set', 'disentangle_mode=entangled']),
                            ('global_local', ['--set', 'disentangle_mode=global_local'])):
            out = tmp_path / name
            assert run(['analyze', '--data', str(synth_dir), '--checkpoint', str(ckpt), '--out', str(out),
                        '--samples', '4', '--no-svg'] + extra) == 0
            tables.append((out / 'attention' / 'distances.csv').read_text())
        assert tables[0] == tables[1] == tables[2]


class TestGradcheck:
    def test_sampled_check_passes(self, capsys):
        assert run(['gradcheck', '--max-entries', '3']) == 0
        assert 'PASS' in capsys.readouterr().out
