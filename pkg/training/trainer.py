"""
Per-writer training: the feature-disentangling VAE followed by the SVM.

Every round makes two parameter updates, first on a batch of genuine pairs
(GG) and then on a batch of genuine / random-forgery pairs (GF). Each update
applies theta <- theta - eta1 * D_vae - eta2 * D_fd, where D is the raw
gradient for SGD or its Adam-preconditioned version.
"""
import hashlib
import logging
from dataclasses import dataclass, field, replace

import numpy as np

from classifier.svm import SvmConfig, smo_train
from feature_extractor.disentangle import PairBatch, check_margin, fd_loss_and_grads
from feature_extractor.numeric import OPTIMIZERS, check_finite, make_direction
from feature_extractor.vae import VaeConfig, VaeModel, encoder_forward, extract_features, negative_elbo
from utils.errors import NumericError

logger = logging.getLogger(__name__)


def derive_seed(seed, *parts):
    """
    Stable 63-bit stream seed from the master seed and identifiers
    (writer id, image id, ...).
    """
    text = ':'.join([str(seed), *map(str, parts)])
    return int.from_bytes(hashlib.sha256(text.encode('utf-8')).digest()[:8], 'little') >> 1


@dataclass(frozen=True)
class TrainConfig:
    eta1: float = 1e-3
    eta2: float = 1e-3
    margin: float = None  # None: 2 * latent_dim
    rounds: int = 2000
    batch_size: int = 16
    seed: int = 0
    latent_dim: int = 400
    hidden_dims: tuple = (200, 200, 200)
    kl_weight: float = 1.0
    optimizer: str = 'adam'
    svm: SvmConfig = field(default_factory=SvmConfig)

    def __post_init__(self):
        if self.eta1 < 0 or self.eta2 < 0:
            raise ValueError(f"learning rates must be >= 0, got eta1={self.eta1}, eta2={self.eta2}")
        if self.margin is None:
            # two independent prior draws sit 2 * latent_dim apart on average
            object.__setattr__(self, 'margin', 2.0 * self.latent_dim)
        check_margin(self.margin)
        if self.rounds < 1 or self.batch_size < 1:
            raise ValueError(f"rounds and batch_size must be >= 1, got {self.rounds}, {self.batch_size}")
        if self.optimizer not in OPTIMIZERS:
            raise ValueError(f"unknown optimizer '{self.optimizer}'")

    def vae_config(self, input_dim):
        return VaeConfig(
            input_dim=input_dim,
            hidden_dims=self.hidden_dims,
            latent_dim=self.latent_dim,
            kl_weight=self.kl_weight,
        )

    def to_dict(self):
        return {
            'eta1': self.eta1,
            'eta2': self.eta2,
            'margin': self.margin,
            'rounds': self.rounds,
            'batch_size': self.batch_size,
            'seed': self.seed,
            'latent_dim': self.latent_dim,
            'hidden_dims': list(self.hidden_dims),
            'kl_weight': self.kl_weight,
            'optimizer': self.optimizer,
            'svm': self.svm.to_dict(),
        }


@dataclass
class WriterSplit:
    """
    Images of one enrolled writer, flattened to rows.

    ``random_forgeries`` are genuine signatures of other writers; the id
    lists name the images (random ones as '<writer>/<image>').
    """

    writer_id: str
    genuine_train: np.ndarray
    random_forgeries: np.ndarray
    genuine_test: np.ndarray = None
    skilled_test: np.ndarray = None
    random_test: np.ndarray = None
    genuine_train_ids: list = field(default_factory=list)
    random_forgery_ids: list = field(default_factory=list)
    genuine_test_ids: list = field(default_factory=list)
    skilled_test_ids: list = field(default_factory=list)
    random_test_ids: list = field(default_factory=list)

    def __post_init__(self):
        overlap = set(self.genuine_train_ids) & set(self.genuine_test_ids)
        if overlap:
            raise ValueError(f"writer {self.writer_id}: images both in training and test: {sorted(overlap)}")
        own = [rid for rid in self.random_forgery_ids if rid.split('/', 1)[0] == self.writer_id]
        if own:
            raise ValueError(f"writer {self.writer_id}: own images in the random-forgery pool: {own}")

    @property
    def input_dim(self):
        return self.genuine_train.shape[1]


@dataclass
class TrainingState:
    """Update-direction state (Adam moments) for each loss term."""

    vae_direction: object
    fd_direction: object

    @classmethod
    def create(cls, optimizer):
        return cls(vae_direction=make_direction(optimizer), fd_direction=make_direction(optimizer))


def sample_pair_batch(split, kind, batch_size, rng):
    """
    Sample a batch of image pairs with replacement.

    GG pairs draw two distinct genuine images when more than one exists;
    GF pairs draw a genuine image and a random forgery.

    Args:
        split (WriterSplit): Source pools
        kind (str): 'GG' or 'GF'
        batch_size (int): Pairs per batch
        rng (np.random.Generator): Sampling stream

    Returns:
        PairBatch: Sampled pairs

    Raises:
        ValueError: If a pool the kind needs is empty
    """
    genuine = split.genuine_train
    n_g = 0 if genuine is None else genuine.shape[0]
    if n_g == 0:
        raise ValueError(f"writer {split.writer_id}: no genuine training images")

    i = rng.integers(n_g, size=batch_size)
    if kind == 'GG':
        if n_g == 1:
            j = i.copy()
        else:
            j = (i + rng.integers(1, n_g, size=batch_size)) % n_g
        return PairBatch(xi=genuine[i], xj=genuine[j], kind='GG')
    if kind == 'GF':
        forgeries = split.random_forgeries
        n_f = 0 if forgeries is None else forgeries.shape[0]
        if n_f == 0:
            raise ValueError(f"writer {split.writer_id}: random-forgery pool is empty")
        j = rng.integers(n_f, size=batch_size)
        return PairBatch(xi=genuine[i], xj=forgeries[j], kind='GF')
    raise ValueError(f"pair kind must be 'GG' or 'GF', got '{kind}'")


def joint_gradients(model, batch, margin, rng):
    """
    Mean negative ELBO over every image of the batch and the disentangling
    loss of its pairs, with separate gradients.

    Returns:
        tuple: (loss_vae, grads_vae, loss_fd, grads_fd)
    """
    X = batch.images()
    encoded = encoder_forward(model.params, model.config, X)
    eps = rng.standard_normal((X.shape[0], model.config.latent_dim))
    loss_vae, grads_vae = negative_elbo(model.params, model.config, X, eps, encoded=encoded)
    loss_fd, grads_fd = fd_loss_and_grads(model.params, model.config, batch, margin, encoded=encoded)
    return loss_vae, grads_vae, loss_fd, grads_fd


def apply_update(model, cfg, state, grads_vae, grads_fd):
    d_vae = state.vae_direction(grads_vae)
    d_fd = state.fd_direction(grads_fd)
    model.params = {
        name: value - cfg.eta1 * d_vae[name] - cfg.eta2 * d_fd[name]
        for name, value in model.params.items()
    }


def train_round(model, split, cfg, rng, state=None):
    """
    One training round: a GG update followed by a GF update.

    Args:
        model (VaeModel): Updated in place (its params dict is replaced)
        split (WriterSplit): Training pools
        cfg (TrainConfig): Hyperparameters
        rng (np.random.Generator): Stream for pair sampling and noise
        state (TrainingState, optional): Optimizer state carried across rounds

    Returns:
        tuple: (model, {'loss_vae': ..., 'loss_fd': ...}) averaged over both updates

    Raises:
        NumericError: If a loss is not finite
    """
    state = state or TrainingState.create(cfg.optimizer)
    losses_vae, losses_fd = [], []
    for kind in ('GG', 'GF'):
        batch = sample_pair_batch(split, kind, cfg.batch_size, rng)
        loss_vae, grads_vae, loss_fd, grads_fd = joint_gradients(model, batch, cfg.margin, rng)
        check_finite((loss_vae, loss_fd), f"the {kind} batch losses (loss_vae={loss_vae}, loss_fd={loss_fd})")
        apply_update(model, cfg, state, grads_vae, grads_fd)
        losses_vae.append(loss_vae)
        losses_fd.append(loss_fd)
    return model, {'loss_vae': float(np.mean(losses_vae)), 'loss_fd': float(np.mean(losses_fd))}


def writer_streams(cfg, writer_id):
    """Independent generators (init, training, features, svm) for one writer."""
    root = np.random.SeedSequence(derive_seed(cfg.seed, writer_id))
    init_ss, train_ss, feature_ss, svm_ss = root.spawn(4)
    return (
        np.random.default_rng(init_ss),
        np.random.default_rng(train_ss),
        np.random.default_rng(feature_ss),
        int(svm_ss.generate_state(1)[0]),
    )


def train_feature_extractor(split, cfg, telemetry=None):
    """
    Run ``cfg.rounds`` training rounds on a freshly initialised VAE.

    Args:
        split (WriterSplit): Training pools
        cfg (TrainConfig): Hyperparameters
        telemetry (list, optional): Receives one dict per round

    Returns:
        tuple: (VaeModel, feature generator, svm seed)
    """
    init_rng, train_rng, feature_rng, svm_seed = writer_streams(cfg, split.writer_id)
    model = VaeModel.initialize(cfg.vae_config(split.input_dim), init_rng)
    state = TrainingState.create(cfg.optimizer)

    log_every = max(1, cfg.rounds // 10)
    last = None
    for r in range(cfg.rounds):
        try:
            model, last_losses = train_round(model, split, cfg, train_rng, state)
        except NumericError as e:
            raise NumericError(
                f"writer {split.writer_id}, round {r}: {e} (last telemetry {last})",
                round_index=r, telemetry=last,
            )
        last = {'round': r, **last_losses}
        if telemetry is not None:
            telemetry.append(last)
        if (r + 1) % log_every == 0:
            logger.info(f"writer {split.writer_id} round {r + 1}/{cfg.rounds}: "
                        f"loss_vae={last['loss_vae']:.4f} loss_fd={last['loss_fd']:.4f}")
        else:
            logger.debug(f"writer {split.writer_id} round {r}: {last}")
    return model, feature_rng, svm_seed


def train_writer(split, cfg, telemetry=None):
    """
    Build the feature extractor, then train the writer's SVM on features of
    genuine training images (+1) and random forgeries (-1).

    Args:
        split (WriterSplit): Writer data
        cfg (TrainConfig): Hyperparameters
        telemetry (list, optional): Receives the per-round losses

    Returns:
        tuple: (VaeModel, SvmModel)
    """
    model, feature_rng, svm_seed = train_feature_extractor(split, cfg, telemetry)

    positives = extract_features(model, split.genuine_train, feature_rng)
    negatives = extract_features(model, split.random_forgeries, feature_rng)
    X = np.vstack([positives, negatives])
    y = np.concatenate([np.ones(positives.shape[0]), -np.ones(negatives.shape[0])])

    svm = smo_train(X, y, replace(cfg.svm, seed=svm_seed))
    logger.info(f"✓ writer {split.writer_id}: {svm.n_support} support vectors, converged={svm.converged}")
    return model, svm
