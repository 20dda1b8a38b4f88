"""
Writer-dependent experimental protocol.

Every evaluated writer gets its own split: the first genuine signatures for
training, the following ones for testing, its skilled forgeries for testing
only, and a random-forgery pool built from genuine signatures of other
writers. The split can also be fixed per writer through a dataset manifest
(writer_id, image_id, role), the same format the dry run dumps.
"""
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
import pandas as pd

from classifier.svm import decision_value
from feature_extractor.vae import extract_features
from signature.preprocess import preprocess_image
from training.trainer import WriterSplit, derive_seed, train_writer
from utils.errors import DataError
from utils.file_handler import IMAGE_KINDS, DatasetHandler
from .metrics import FORGERY_KINDS, ScoreSet, eer, frr_far

logger = logging.getLogger(__name__)

ROLES = ('train_genuine', 'random_forgery', 'test_genuine', 'test_skilled', 'test_random')
ROLE_KIND = {
    'train_genuine': 'genuine',
    'random_forgery': 'genuine',
    'test_genuine': 'genuine',
    'test_skilled': 'skilled',
    'test_random': 'genuine',
}
SPLIT_COLUMNS = ('writer_id', 'image_id', 'role')
SCORE_COLUMNS = ('writer_id', 'image_id', 'class', 'score', 'seed')
TELEMETRY_COLUMNS = ('round', 'loss_vae', 'loss_fd')
WRITER_COLUMNS = (
    'writer_id', 'n_train', 'n_random_pool', 'n_test_genuine', 'n_test_skilled', 'n_test_random',
    'eer', 'eer_threshold', 'frr', 'far', 'eer_random', 'eer_random_threshold',
    'frr_svm', 'far_svm_skilled', 'far_svm_random', 'n_support', 'converged',
)
METRIC_COLUMNS = ('eer', 'frr', 'far', 'eer_random', 'frr_svm', 'far_svm_skilled', 'far_svm_random')


@dataclass(frozen=True)
class ProtocolConfig:
    """
    Split counts. Zero means "all" for TEST_GENUINE, TEST_SKILLED,
    RANDOM_POOL_WRITERS and EVAL_WRITERS.
    """

    name: str = 'custom'
    train_genuine: int = 10
    test_genuine: int = 0
    test_skilled: int = 0
    random_per_writer: int = 1
    random_pool_writers: int = 0
    eval_writers: int = 0
    random_test: bool = True

    def __post_init__(self):
        if self.train_genuine < 1 or self.random_per_writer < 1:
            raise ValueError("train_genuine and random_per_writer must be >= 1")
        for name in ('test_genuine', 'test_skilled', 'random_pool_writers', 'eval_writers'):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0, got {getattr(self, name)}")

    @property
    def min_genuine(self):
        return self.train_genuine + max(self.test_genuine, 1)

    @property
    def min_skilled(self):
        return self.test_skilled

    def to_dict(self):
        return {
            'name': self.name,
            'train_genuine': self.train_genuine,
            'test_genuine': self.test_genuine,
            'test_skilled': self.test_skilled,
            'random_per_writer': self.random_per_writer,
            'random_pool_writers': self.random_pool_writers,
            'eval_writers': self.eval_writers,
            'random_test': self.random_test,
        }


@dataclass
class WriterPlan:
    """
    Image references of one writer's split, per role.

    A reference is (owner, kind, stem). Images of other writers are shown
    as '<owner>/<stem>'.
    """

    writer_id: str
    roles: dict = field(default_factory=lambda: {role: [] for role in ROLES})

    def image_id(self, ref):
        owner, _, stem = ref
        return stem if owner == self.writer_id else f'{owner}/{stem}'

    def image_ids(self, role):
        return [self.image_id(ref) for ref in self.roles[role]]

    def count(self, role):
        return len(self.roles[role])

    def rows(self):
        return [
            {'writer_id': self.writer_id, 'image_id': self.image_id(ref), 'role': role}
            for role in ROLES for ref in self.roles[role]
        ]


def scan_dataset(handler):
    """writer_id -> kind -> sorted image stems."""
    return {
        writer: {kind: [stem for stem, _ in handler.list_images(writer, kind)] for kind in IMAGE_KINDS}
        for writer in handler.list_writers()
    }


def _plan_from_protocol(writer, writers, inventory, protocol):
    genuine = inventory[writer]['genuine']
    skilled = inventory[writer]['skilled']
    if len(genuine) < protocol.min_genuine:
        return None, f"{len(genuine)} genuine images, protocol needs {protocol.min_genuine}"
    if len(skilled) < protocol.min_skilled:
        return None, f"{len(skilled)} skilled forgeries, protocol needs {protocol.min_skilled}"

    plan = WriterPlan(writer)
    n_train = protocol.train_genuine
    test_end = len(genuine) if protocol.test_genuine == 0 else n_train + protocol.test_genuine
    plan.roles['train_genuine'] = [(writer, 'genuine', s) for s in genuine[:n_train]]
    plan.roles['test_genuine'] = [(writer, 'genuine', s) for s in genuine[n_train:test_end]]
    chosen = skilled if protocol.test_skilled == 0 else skilled[:protocol.test_skilled]
    plan.roles['test_skilled'] = [(writer, 'skilled', s) for s in chosen]

    others = [w for w in writers if w != writer]
    pool = others[-protocol.random_pool_writers:] if protocol.random_pool_writers else others
    k = protocol.random_per_writer
    for owner in pool:
        owner_genuine = inventory[owner]['genuine']
        plan.roles['random_forgery'] += [(owner, 'genuine', s) for s in owner_genuine[:k]]
        if protocol.random_test and len(owner_genuine) > k:
            plan.roles['test_random'].append((owner, 'genuine', owner_genuine[-1]))

    if not plan.roles['random_forgery']:
        return None, "random-forgery pool is empty"
    if not plan.roles['test_skilled'] and not plan.roles['test_random']:
        return None, "no forgeries to score"
    return plan, None


def _plan_from_manifest(writer, entries, inventory):
    plan = WriterPlan(writer)
    for image_id, role in entries:
        if role not in ROLES:
            raise DataError(f"manifest: unknown role '{role}' for {writer}/{image_id}")
        owner, stem = image_id.split('/', 1) if '/' in image_id else (writer, image_id)
        kind = ROLE_KIND[role]
        if owner not in inventory or stem not in inventory[owner][kind]:
            raise DataError(f"manifest: {kind} image '{image_id}' of writer {writer} not found")
        if role in ('random_forgery', 'test_random') and owner == writer:
            raise DataError(f"manifest: random forgery '{image_id}' belongs to writer {writer} itself")
        plan.roles[role].append((owner, kind, stem))

    if not plan.roles['train_genuine'] or not plan.roles['random_forgery']:
        return None, "manifest lists no training genuines or no random forgeries"
    if not plan.roles['test_genuine']:
        return None, "manifest lists no test genuines"
    return plan, None


def plan_protocol(handler, protocol, manifest=None, writers=None):
    """
    Build every writer's split.

    Args:
        handler (DatasetHandler): Dataset access
        protocol (ProtocolConfig): Split counts
        manifest (pandas.DataFrame, optional): Fixed splits for the writers it lists
        writers (list, optional): Restrict to these writer ids

    Returns:
        tuple: (plans sorted by writer id, skipped list of {writer_id, reason})

    Raises:
        DataError: Unknown writer ids or a manifest naming missing images
    """
    inventory = scan_dataset(handler)
    all_writers = sorted(inventory)
    targets = all_writers[:protocol.eval_writers] if protocol.eval_writers else all_writers
    if writers is not None:
        unknown = sorted(set(writers) - set(all_writers))
        if unknown:
            raise DataError(f"unknown writer id(s): {', '.join(unknown)}")
        targets = sorted(writers)

    fixed = {}
    if manifest is not None:
        for row in manifest.itertuples(index=False):
            fixed.setdefault(row.writer_id, []).append((row.image_id, row.role))

    plans, skipped = [], []
    for writer in targets:
        if writer in fixed:
            plan, reason = _plan_from_manifest(writer, fixed[writer], inventory)
        else:
            plan, reason = _plan_from_protocol(writer, all_writers, inventory, protocol)
        if plan is None:
            logger.warning(f"✗ skipping writer {writer}: {reason}")
            skipped.append({'writer_id': writer, 'reason': reason})
        else:
            plans.append(plan)
    return plans, skipped


def split_rows(plans):
    """Rows of the dry-run split dump."""
    return [row for plan in plans for row in plan.rows()]


class ImageLoader:
    """
    Reads and preprocesses images on demand, caching the flattened vectors.
    """

    def __init__(self, handler, preprocess_cfg):
        self.handler = handler
        self.preprocess_cfg = preprocess_cfg
        self._paths = {}
        self._vectors = {}

    def path(self, owner, kind, stem):
        if (owner, kind) not in self._paths:
            self._paths[(owner, kind)] = dict(self.handler.list_images(owner, kind))
        try:
            return self._paths[(owner, kind)][stem]
        except KeyError:
            raise DataError(f"no {kind} image '{stem}' for writer {owner}")

    def vector(self, ref):
        if ref not in self._vectors:
            img = self.handler.read_image(self.path(*ref))
            self._vectors[ref] = preprocess_image(img, self.preprocess_cfg).flatten()
        return self._vectors[ref]

    def matrix(self, refs):
        if not refs:
            return np.empty((0, self.preprocess_cfg.input_dim))
        return np.vstack([self.vector(ref) for ref in refs])


def build_split(plan, loader, with_tests=True):
    """Load a WriterPlan's images into a WriterSplit; test sets stay empty without ``with_tests``."""
    roles = plan.roles if with_tests else {
        role: (refs if role in ('train_genuine', 'random_forgery') else []) for role, refs in plan.roles.items()
    }
    return WriterSplit(
        writer_id=plan.writer_id,
        genuine_train=loader.matrix(roles['train_genuine']),
        random_forgeries=loader.matrix(roles['random_forgery']),
        genuine_test=loader.matrix(roles['test_genuine']),
        skilled_test=loader.matrix(roles['test_skilled']),
        random_test=loader.matrix(roles['test_random']),
        genuine_train_ids=[plan.image_id(ref) for ref in roles['train_genuine']],
        random_forgery_ids=[plan.image_id(ref) for ref in roles['random_forgery']],
        genuine_test_ids=[plan.image_id(ref) for ref in roles['test_genuine']],
        skilled_test_ids=[plan.image_id(ref) for ref in roles['test_skilled']],
        random_test_ids=[plan.image_id(ref) for ref in roles['test_random']],
    )


def image_seed(seed, writer_id, image_id):
    """Scoring stream seed of one image under one writer's model."""
    return derive_seed(seed, writer_id, image_id)


def score_image(vae, svm, x, seed):
    """
    SVM decision value of one flattened image, using a feature draw from
    ``seed``. Identical inputs give identical scores.
    """
    features = extract_features(vae, x, np.random.default_rng(seed))
    return decision_value(svm, features)


@dataclass
class WriterResult:
    writer_id: str
    row: dict
    scores: list
    telemetry: list
    vae: object = None
    svm: object = None


def _score_rows(split, vae, svm, seed):
    groups = (
        ('genuine', split.genuine_test, split.genuine_test_ids),
        ('skilled', split.skilled_test, split.skilled_test_ids),
        ('random', split.random_test, split.random_test_ids),
    )
    rows = []
    for label, X, ids in groups:
        for x, image_id in zip(X, ids):
            s = image_seed(seed, split.writer_id, image_id)
            rows.append({
                'writer_id': split.writer_id,
                'image_id': image_id,
                'class': label,
                'score': score_image(vae, svm, x, s),
                'seed': s,
            })
    return rows


def _scores_of(rows, label):
    return np.array([r['score'] for r in rows if r['class'] == label], dtype=np.float64)


def score_set(rows):
    """ScoreSet of a writer's score rows, forgeries tagged with their kind."""
    forgeries = [r for r in rows if r['class'] in FORGERY_KINDS]
    return ScoreSet(
        _scores_of(rows, 'genuine'),
        [r['score'] for r in forgeries],
        [r['class'] for r in forgeries],
    )


def writer_metrics(rows):
    """
    Per-writer rates from score rows: EER on skilled forgeries (random ones
    when a writer has no skilled forgeries), EER on random forgeries, and
    FRR/FAR at the SVM's own threshold 0.
    """
    scores = score_set(rows)
    skilled, random = scores.only('skilled'), scores.only('random')
    nan = float('nan')
    metrics = dict.fromkeys(METRIC_COLUMNS + ('eer_threshold', 'eer_random_threshold'), nan)

    headline = skilled if skilled.has_both_classes() else random
    if headline.has_both_classes():
        metrics['eer'], metrics['eer_threshold'] = eer(headline)
        metrics['frr'], metrics['far'] = frr_far(headline, metrics['eer_threshold'])
    if random.has_both_classes():
        metrics['eer_random'], metrics['eer_random_threshold'] = eer(random)
    if scores.genuine_scores.size:
        metrics['frr_svm'] = float(np.mean(scores.genuine_scores < 0.0))
    if skilled.forgery_scores.size:
        metrics['far_svm_skilled'] = float(np.mean(skilled.forgery_scores >= 0.0))
    if random.forgery_scores.size:
        metrics['far_svm_random'] = float(np.mean(random.forgery_scores >= 0.0))
    return metrics


def evaluate_writer(split, run_cfg):
    """
    Train one writer's model and score its held-out images.

    Args:
        split (WriterSplit): Writer data
        run_cfg (RunConfig): Run configuration

    Returns:
        WriterResult: Report row, score rows and training telemetry
    """
    telemetry = []
    vae, svm = train_writer(split, run_cfg.train, telemetry)
    scores = _score_rows(split, vae, svm, run_cfg.seed)
    row = {
        'writer_id': split.writer_id,
        'n_train': len(split.genuine_train_ids),
        'n_random_pool': len(split.random_forgery_ids),
        'n_test_genuine': len(split.genuine_test_ids),
        'n_test_skilled': len(split.skilled_test_ids),
        'n_test_random': len(split.random_test_ids),
        **writer_metrics(scores),
        'n_support': svm.n_support,
        'converged': svm.converged,
    }
    logger.info(f"✓ writer {split.writer_id}: EER {row['eer']:.4f}, random EER {row['eer_random']:.4f}")
    return WriterResult(split.writer_id, row, scores, telemetry)


def _evaluate_task(task):
    root, plan, run_cfg = task
    loader = ImageLoader(DatasetHandler(root), run_cfg.preprocess)
    return evaluate_writer(build_split(plan, loader), run_cfg)


def _train_task(task):
    root, plan, run_cfg = task
    loader = ImageLoader(DatasetHandler(root), run_cfg.preprocess)
    split = build_split(plan, loader, with_tests=False)
    telemetry = []
    vae, svm = train_writer(split, run_cfg.train, telemetry)
    row = {'genuine_train_ids': split.genuine_train_ids, 'random_forgery_ids': split.random_forgery_ids}
    return WriterResult(split.writer_id, row, [], telemetry, vae, svm)


def _run_tasks(fn, tasks, jobs):
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(fn, tasks))
    return [fn(task) for task in tasks]


def train_writers(root, run_cfg, plans, jobs=1):
    """
    Train the models of the planned writers.

    Returns:
        list: WriterResult with vae, svm and telemetry, sorted by writer id
    """
    results = _run_tasks(_train_task, [(root, plan, run_cfg) for plan in plans], jobs)
    return sorted(results, key=lambda r: r.writer_id)


def _nan_to_none(value):
    if isinstance(value, (float, np.floating)) and math.isnan(value):
        return None
    if isinstance(value, np.generic):
        return value.item()
    return value


@dataclass
class EvalReport:
    rows: list
    aggregate: dict
    pooled: dict
    metadata: dict
    skipped: list
    scores: list = field(default_factory=list)
    telemetry: dict = field(default_factory=dict)

    def to_frame(self):
        return pd.DataFrame(self.rows, columns=list(WRITER_COLUMNS))

    def to_dict(self):
        return {
            'writers': [{k: _nan_to_none(v) for k, v in row.items()} for row in self.rows],
            'aggregate': {
                'mode': 'mean of per-writer rates',
                **{k: {s: _nan_to_none(v) for s, v in stats.items()} for k, stats in self.aggregate.items()},
            },
            'pooled': {'mode': 'global threshold over all writers', **{
                k: _nan_to_none(v) for k, v in self.pooled.items()
            }},
            'metadata': self.metadata,
            'skipped': self.skipped,
        }

    def to_text(self):
        lines = [
            f"protocol {self.metadata['protocol']['name']}: {len(self.rows)} writers evaluated, "
            f"{len(self.skipped)} skipped (seed {self.metadata['seed']}, {self.metadata['seed_source']})",
            '',
        ]
        if self.rows:
            lines.append(self.to_frame().to_string(index=False, float_format=lambda v: f'{v:.4f}'))
            lines.append('')
        for name in METRIC_COLUMNS:
            stats = self.aggregate[name]
            lines.append(f"mean {name:<16} {_fmt(stats['mean'])} (std {_fmt(stats['std'])})")
        lines.append(f"pooled eer_skilled     {_fmt(self.pooled['eer_skilled'])}")
        lines.append(f"pooled eer_random      {_fmt(self.pooled['eer_random'])}")
        for item in self.skipped:
            lines.append(f"skipped {item['writer_id']}: {item['reason']}")
        return '\n'.join(lines) + '\n'


def _fmt(value):
    return 'n/a' if value is None or (isinstance(value, float) and math.isnan(value)) else f'{value:.4f}'


def aggregate_rows(rows):
    """Mean and population std of every metric over writers, NaNs ignored."""
    df = pd.DataFrame(rows, columns=list(WRITER_COLUMNS))
    stats = {}
    for name in METRIC_COLUMNS:
        column = pd.to_numeric(df[name], errors='coerce').dropna()
        stats[name] = {
            'mean': float(column.mean()) if len(column) else float('nan'),
            'std': float(column.std(ddof=0)) if len(column) else float('nan'),
            'writers': int(len(column)),
        }
    return stats


def pooled_rates(score_rows):
    """EER with one global threshold over every writer's scores."""
    genuine = _scores_of(score_rows, 'genuine')
    pooled = {}
    for label in ('skilled', 'random'):
        forged = _scores_of(score_rows, label)
        if genuine.size and forged.size:
            pooled[f'eer_{label}'], pooled[f'threshold_{label}'] = eer(ScoreSet(genuine, forged))
        else:
            pooled[f'eer_{label}'] = pooled[f'threshold_{label}'] = float('nan')
    return pooled


def run_protocol(root, run_cfg, jobs=1, writers=None):
    """
    Run the full protocol on a dataset.

    Args:
        root (str): Dataset root
        run_cfg (RunConfig): Run configuration
        jobs (int): Writers processed in parallel
        writers (list, optional): Restrict to these writer ids

    Returns:
        EvalReport: Per-writer rows sorted by writer id, aggregates, pooled EER
    """
    handler = DatasetHandler(root)
    plans, skipped = plan_protocol(handler, run_cfg.protocol, handler.read_manifest(), writers)
    tasks = [(root, plan, run_cfg) for plan in plans]
    results = sorted(_run_tasks(_evaluate_task, tasks, jobs), key=lambda r: r.writer_id)

    rows = [r.row for r in results]
    scores = [s for r in results for s in r.scores]
    metadata = {
        'protocol': run_cfg.protocol.to_dict(),
        'config': run_cfg.to_dict(),
        'seed': run_cfg.seed,
        'seed_source': run_cfg.seed_source,
        'writers_evaluated': len(rows),
        'writers_skipped': len(skipped),
        'counts': {
            name: sorted({row[name] for row in rows})
            for name in ('n_train', 'n_random_pool', 'n_test_genuine', 'n_test_skilled', 'n_test_random')
        },
    }
    return EvalReport(
        rows=rows,
        aggregate=aggregate_rows(rows),
        pooled=pooled_rates(scores),
        metadata=metadata,
        skipped=skipped,
        scores=scores,
        telemetry={r.writer_id: r.telemetry for r in results},
    )
