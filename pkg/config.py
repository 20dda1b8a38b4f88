import logging
import os
from dataclasses import dataclass

from dotenv import dotenv_values, load_dotenv

from utils.errors import ConfigError
from utils.validators import ConfigValidator

# Load environment variables from .env file
load_dotenv()

logger = logging.getLogger(__name__)

SCHEMA_VERSION = 1


class Config:
    # Application settings
    APP_NAME = os.environ.get('APP_NAME', 'FDV-SV signature verification')
    LOG_LEVEL = os.environ.get('LOG_LEVEL', 'INFO')
    DEFAULT_JOBS = int(os.environ.get('FDV_JOBS', '1'))


# Benchmark split presets; random forgeries are the first genuine of each pool writer
PROTOCOL_PRESETS = {
    'mcyt': {
        'TRAIN_GENUINE': 10,
        'TEST_GENUINE': 5,
        'TEST_SKILLED': 15,
        'RANDOM_PER_WRITER': 1,
        'RANDOM_POOL_WRITERS': 0,
        'EVAL_WRITERS': 0,
        'RANDOM_TEST': True,
    },
    'gpds': {
        'TRAIN_GENUINE': 12,
        'TEST_GENUINE': 12,
        'TEST_SKILLED': 30,
        'RANDOM_PER_WRITER': 1,
        'RANDOM_POOL_WRITERS': 1000,
        'EVAL_WRITERS': 2000,
        'RANDOM_TEST': True,
    },
    'custom': {
        'TRAIN_GENUINE': 10,
        'TEST_GENUINE': 0,
        'TEST_SKILLED': 0,
        'RANDOM_PER_WRITER': 1,
        'RANDOM_POOL_WRITERS': 0,
        'EVAL_WRITERS': 0,
        'RANDOM_TEST': True,
    },
}


def _as_int(value):
    return int(value)


def _as_float(value):
    return float(value)


def _as_bool(value):
    lowered = value.strip().lower()
    if lowered in ('1', 'true', 'yes', 'on'):
        return True
    if lowered in ('0', 'false', 'no', 'off'):
        return False
    raise ValueError(f"not a boolean: {value}")


def _as_int_list(value):
    return tuple(int(part) for part in value.split(',') if part.strip())


def _float_or(keyword):
    def parse(value):
        return keyword if value.strip().lower() == keyword else float(value)
    return parse


def _choice(*options):
    def parse(value):
        value = value.strip().lower()
        if value not in options:
            raise ValueError(f"expected one of {options}, got '{value}'")
        return value
    return parse


# Run-config schema: key -> (parser, default)
RUN_SCHEMA = {
    'SCHEMA_VERSION': (_as_int, None),
    # preprocessing
    'SIDE_H': (_as_int, 64),
    'SIDE_W': (_as_int, 64),
    'STRICT_BINARY': (_as_bool, False),
    # network
    'HIDDEN_DIMS': (_as_int_list, (200, 200, 200)),
    'LATENT_DIM': (_as_int, 400),
    'KL_WEIGHT': (_as_float, 1.0),
    # training
    'ETA1': (_as_float, 1e-3),
    'ETA2': (_as_float, 1e-3),
    'MARGIN': (_as_float, None),  # None: 2 * LATENT_DIM
    'ROUNDS': (_as_int, 2000),
    'BATCH_SIZE': (_as_int, 16),
    'OPTIMIZER': (_choice('adam', 'sgd'), 'adam'),
    'SEED': (_as_int, 0),
    # classifier
    'SVM_GAMMA': (_float_or('scale'), 'scale'),
    'SVM_C': (_as_float, 1.0),
    'SVM_TOL': (_as_float, 1e-3),
    'SVM_MAX_PASSES': (_as_int, 1000),
    'SVM_CLASS_WEIGHT_NEG': (_float_or('auto'), 'auto'),
    # protocol (defaults come from the preset)
    'PROTOCOL': (_choice(*PROTOCOL_PRESETS), 'mcyt'),
    'TRAIN_GENUINE': (_as_int, None),
    'TEST_GENUINE': (_as_int, None),
    'TEST_SKILLED': (_as_int, None),
    'RANDOM_PER_WRITER': (_as_int, None),
    'RANDOM_POOL_WRITERS': (_as_int, None),
    'EVAL_WRITERS': (_as_int, None),
    'RANDOM_TEST': (_as_bool, None),
}

CORPUS_SCHEMA = {
    'SCHEMA_VERSION': (_as_int, None),
    'N_WRITERS': (_as_int, 20),
    'GENUINE_PER_WRITER': (_as_int, 15),
    'SKILLED_PER_WRITER': (_as_int, 10),
    'JITTER_GENUINE': (_as_float, 0.01),
    'JITTER_SKILLED': (_as_float, 0.04),
    'CANVAS_H': (_as_int, 96),
    'CANVAS_W': (_as_int, 192),
    'SEED': (_as_int, 0),
}


def parse_document(path, schema):
    """
    Read a KEY=value document and coerce it against ``schema``.

    Args:
        path (str): Path to the document
        schema (dict): Key -> (parser, default)

    Returns:
        dict: Every schema key mapped to its parsed value or default

    Raises:
        ConfigError: Missing file, unknown keys, bad values or schema version
    """
    if not os.path.isfile(path):
        raise ConfigError(f"config file not found: {path}")

    raw = dotenv_values(path, interpolate=False)
    unknown = sorted(set(raw) - set(schema))
    if unknown:
        raise ConfigError(f"unknown config keys in {path}: {', '.join(unknown)}")

    values = {}
    for key, (parser, default) in schema.items():
        text = raw.get(key)
        if text is None:
            values[key] = default
            continue
        try:
            values[key] = parser(text)
        except ValueError as e:
            raise ConfigError(f"bad value for {key} in {path}: {e}")

    version = values['SCHEMA_VERSION']
    if version != SCHEMA_VERSION:
        raise ConfigError(f"{path}: SCHEMA_VERSION must be {SCHEMA_VERSION}, got {version}")
    return values


def default_values(schema):
    values = {key: default for key, (_, default) in schema.items()}
    values['SCHEMA_VERSION'] = SCHEMA_VERSION
    return values


@dataclass(frozen=True)
class RunConfig:
    """Everything one training/evaluation run depends on."""

    preprocess: object
    train: object
    protocol: object
    seed_source: str = 'config'

    @property
    def seed(self):
        return self.train.seed

    def to_dict(self):
        return {
            'schema_version': SCHEMA_VERSION,
            'preprocess': self.preprocess.to_dict(),
            'train': self.train.to_dict(),
            'protocol': self.protocol.to_dict(),
            'seed': self.seed,
            'seed_source': self.seed_source,
        }


def build_run_config(values):
    """Turn parsed key/values into a RunConfig, applying FDV_SEED."""
    from classifier.svm import SvmConfig
    from evaluation.protocol import ProtocolConfig
    from signature.preprocess import PreprocessConfig
    from training.trainer import TrainConfig

    ConfigValidator.validate_run_values(values)

    seed, seed_source = values['SEED'], 'config'
    env_seed = os.environ.get('FDV_SEED')
    if env_seed is not None and env_seed.strip():
        try:
            seed, seed_source = int(env_seed), 'env'
            logger.info(f"master seed {seed} taken from FDV_SEED (config says {values['SEED']})")
        except ValueError:
            raise ConfigError(f"FDV_SEED must be an integer, got '{env_seed}'")

    preset = dict(PROTOCOL_PRESETS[values['PROTOCOL']])
    for key in preset:
        if values[key] is not None:
            preset[key] = values[key]

    svm = SvmConfig(
        gamma=values['SVM_GAMMA'],
        C=values['SVM_C'],
        tol=values['SVM_TOL'],
        max_passes=values['SVM_MAX_PASSES'],
        class_weight_neg=None if values['SVM_CLASS_WEIGHT_NEG'] == 'auto' else values['SVM_CLASS_WEIGHT_NEG'],
        seed=seed,
    )
    train = TrainConfig(
        eta1=values['ETA1'],
        eta2=values['ETA2'],
        margin=values['MARGIN'],
        rounds=values['ROUNDS'],
        batch_size=values['BATCH_SIZE'],
        seed=seed,
        latent_dim=values['LATENT_DIM'],
        hidden_dims=tuple(values['HIDDEN_DIMS']),
        kl_weight=values['KL_WEIGHT'],
        optimizer=values['OPTIMIZER'],
        svm=svm,
    )
    protocol = ProtocolConfig(
        name=values['PROTOCOL'],
        train_genuine=preset['TRAIN_GENUINE'],
        test_genuine=preset['TEST_GENUINE'],
        test_skilled=preset['TEST_SKILLED'],
        random_per_writer=preset['RANDOM_PER_WRITER'],
        random_pool_writers=preset['RANDOM_POOL_WRITERS'],
        eval_writers=preset['EVAL_WRITERS'],
        random_test=preset['RANDOM_TEST'],
    )
    preprocess = PreprocessConfig(
        side_h=values['SIDE_H'],
        side_w=values['SIDE_W'],
        strict_binary=values['STRICT_BINARY'],
    )
    return RunConfig(preprocess=preprocess, train=train, protocol=protocol, seed_source=seed_source)


def load_run_config(path=None):
    """
    Load a run-config file (or the defaults when ``path`` is None).

    Returns:
        RunConfig: Parsed configuration
    """
    values = parse_document(path, RUN_SCHEMA) if path else default_values(RUN_SCHEMA)
    return build_run_config(values)


def load_corpus_spec(path=None):
    """Load a synthetic-corpus spec file into a CorpusSpec."""
    from signature.synthetic import CorpusSpec

    values = parse_document(path, CORPUS_SCHEMA) if path else default_values(CORPUS_SCHEMA)
    ConfigValidator.validate_corpus_values(values)
    return CorpusSpec(
        n_writers=values['N_WRITERS'],
        genuine_per_writer=values['GENUINE_PER_WRITER'],
        skilled_per_writer=values['SKILLED_PER_WRITER'],
        jitter_genuine=values['JITTER_GENUINE'],
        jitter_skilled=values['JITTER_SKILLED'],
        canvas_h=values['CANVAS_H'],
        canvas_w=values['CANVAS_W'],
        seed=values['SEED'],
    )
