import pytest

from config import load_corpus_spec, load_run_config
from utils.errors import ConfigError
from conftest import write_document


def test_tiny_config_values(run_config_file):
    cfg = load_run_config(run_config_file())
    assert cfg.preprocess.input_dim == 256
    assert cfg.train.hidden_dims == (16,)
    assert cfg.train.latent_dim == 4
    assert cfg.train.rounds == 6
    assert cfg.seed == 11 and cfg.seed_source == 'config'
    assert cfg.train.svm.seed == 11
    assert cfg.protocol.train_genuine == 4


def test_defaults_without_file():
    cfg = load_run_config()
    assert cfg.train.latent_dim == 400
    assert cfg.train.hidden_dims == (200, 200, 200)
    assert cfg.protocol.name == 'mcyt'
    assert cfg.preprocess.input_dim == 64 * 64


def test_margin_follows_latent_size(run_config_file):
    assert load_run_config(run_config_file()).train.margin == 8.0
    assert load_run_config().train.margin == 800.0
    assert load_run_config(run_config_file(MARGIN=0.5)).train.margin == 0.5


def test_mcyt_preset(run_config_file):
    path = run_config_file(PROTOCOL='mcyt', TRAIN_GENUINE=None, TEST_GENUINE=None, TEST_SKILLED=None)
    protocol = load_run_config(path).protocol
    assert (protocol.train_genuine, protocol.test_genuine, protocol.test_skilled) == (10, 5, 15)


def test_gpds_preset(run_config_file):
    path = run_config_file(PROTOCOL='gpds', TRAIN_GENUINE=None, TEST_GENUINE=None, TEST_SKILLED=None)
    protocol = load_run_config(path).protocol
    assert protocol.train_genuine == 12
    assert protocol.test_skilled == 30
    assert protocol.random_pool_writers == 1000


def test_overrides_beat_preset(run_config_file):
    protocol = load_run_config(run_config_file(PROTOCOL='mcyt', TRAIN_GENUINE=8)).protocol
    assert protocol.train_genuine == 8
    assert protocol.test_genuine == 0


def test_unknown_key(run_config_file):
    with pytest.raises(ConfigError, match='LEARNING_RATE'):
        load_run_config(run_config_file(LEARNING_RATE=0.1))


def test_missing_schema_version(tmp_path):
    path = write_document(tmp_path / 'run.env', {'SEED': 3})
    with pytest.raises(ConfigError):
        load_run_config(path)


def test_bad_value(run_config_file):
    with pytest.raises(ConfigError):
        load_run_config(run_config_file(ROUNDS='many'))
    with pytest.raises(ConfigError):
        load_run_config(run_config_file(MARGIN=0))


def test_missing_file(tmp_path):
    with pytest.raises(ConfigError):
        load_run_config(str(tmp_path / 'absent.env'))


def test_seed_from_environment(run_config_file, monkeypatch):
    monkeypatch.setenv('FDV_SEED', '77')
    cfg = load_run_config(run_config_file())
    assert cfg.seed == 77
    assert cfg.seed_source == 'env'
    assert cfg.to_dict()['seed_source'] == 'env'


def test_bad_seed_from_environment(run_config_file, monkeypatch):
    monkeypatch.setenv('FDV_SEED', 'abc')
    with pytest.raises(ConfigError):
        load_run_config(run_config_file())


def test_corpus_spec(tmp_path):
    path = write_document(tmp_path / 'corpus.env', {'SCHEMA_VERSION': 1, 'N_WRITERS': 5, 'SEED': 9})
    spec = load_corpus_spec(path)
    assert spec.n_writers == 5 and spec.seed == 9
    assert spec.genuine_per_writer == 15


def test_corpus_spec_rejects_jitter_order(tmp_path):
    path = write_document(tmp_path / 'corpus.env', {
        'SCHEMA_VERSION': 1, 'JITTER_GENUINE': 0.1, 'JITTER_SKILLED': 0.05,
    })
    with pytest.raises(ConfigError):
        load_corpus_spec(path)
