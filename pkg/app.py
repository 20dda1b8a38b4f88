"""
Command-line application for writer-dependent offline signature verification.
"""
import argparse
import json
import logging
import os
import sys
from dataclasses import replace

import numpy as np

# Import configuration
from config import Config, load_corpus_spec, load_run_config

# Import pipeline modules
from evaluation.latent_plot import latent_plot
from evaluation.protocol import (
    SCORE_COLUMNS, SPLIT_COLUMNS, TELEMETRY_COLUMNS, WRITER_COLUMNS, ImageLoader, build_split,
    image_seed, plan_protocol, run_protocol, score_image, split_rows, train_writers,
)
from signature.preprocess import PreprocessConfig, preprocess_image
from signature.synthetic import gen_corpus
from training.trainer import train_writer

# Import utility modules
from utils.errors import ConfigError, DataError, FdvError
from utils.file_handler import DatasetHandler, write_csv, write_json, write_text
from utils.model_store import MODEL_SUFFIX, load_model, save_model
from utils.validators import DatasetValidator

logger = logging.getLogger('fdv')


class CliParser(argparse.ArgumentParser):
    """ArgumentParser whose usage errors exit with status 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def emit(payload):
    """Machine output: sorted JSON on stdout."""
    print(json.dumps(payload, indent=2, sort_keys=True))


def require_dataset(path):
    handler = DatasetHandler(path)
    if not handler.exists():
        raise DataError(f"{path} is not a dataset: missing 'writers' directory")
    return handler


def cmd_gen_synthetic(args):
    """Generate a synthetic corpus."""
    spec = load_corpus_spec(args.spec)
    summary = gen_corpus(spec, args.out, force=args.force, jobs=args.jobs)
    emit(summary)
    return 0


def cmd_train(args):
    """Train per-writer models and persist them as FDV1 containers."""
    run_cfg = load_run_config(args.config)
    handler = require_dataset(args.data)
    writers = [args.writer] if args.writer else None
    plans, skipped = plan_protocol(handler, run_cfg.protocol, handler.read_manifest(), writers)
    if args.writer and not plans:
        raise DataError(f"writer {args.writer} cannot be trained: {skipped[0]['reason']}")

    results = train_writers(args.data, run_cfg, plans, jobs=args.jobs)
    os.makedirs(args.out, exist_ok=True)
    models = []
    for result in results:
        meta = {
            'writer_id': result.writer_id,
            'seed': run_cfg.seed,
            'seed_source': run_cfg.seed_source,
            'config': run_cfg.to_dict(),
            **result.row,
        }
        path = os.path.join(args.out, result.writer_id + MODEL_SUFFIX)
        save_model(path, result.vae, result.svm, meta)
        write_csv(os.path.join(args.out, f'{result.writer_id}_telemetry.csv'), result.telemetry, TELEMETRY_COLUMNS)
        models.append(path)
        logger.info(f"✓ saved {path}")

    summary = {
        'models': models,
        'skipped': skipped,
        'seed': run_cfg.seed,
        'seed_source': run_cfg.seed_source,
    }
    write_json(os.path.join(args.out, 'train_summary.json'), summary)
    emit(summary)
    return 0


def cmd_verify(args):
    """Score one questioned signature against a writer's model."""
    vae, svm, header = load_model(args.model)
    meta = header.get('meta', {})
    preprocess_cfg = PreprocessConfig(**meta.get('config', {}).get('preprocess', {}))
    if preprocess_cfg.input_dim != vae.config.input_dim:
        raise DataError(f"{args.model}: preprocessing gives {preprocess_cfg.input_dim} pixels, "
                        f"model expects {vae.config.input_dim}")

    x = preprocess_image(DatasetHandler.read_image(args.image), preprocess_cfg).flatten()
    if args.seed is not None:
        seed = args.seed
    else:
        stem = os.path.splitext(os.path.basename(args.image))[0]
        seed = image_seed(meta.get('seed', 0), meta.get('writer_id', ''), stem)

    score = score_image(vae, svm, x, seed)
    emit({
        'score': score,
        'decision': 'genuine' if score >= 0.0 else 'forgery',
        'seed': seed,
        'writer_id': meta.get('writer_id'),
    })
    return 0


def cmd_evaluate(args):
    """Run the evaluation protocol and write the report."""
    run_cfg = load_run_config(args.config)
    handler = require_dataset(args.data)
    os.makedirs(args.out, exist_ok=True)

    if args.dry_run:
        plans, skipped = plan_protocol(handler, run_cfg.protocol, handler.read_manifest(), args.writer)
        write_csv(os.path.join(args.out, 'splits.csv'), split_rows(plans), SPLIT_COLUMNS)
        emit({
            'writers': {plan.writer_id: {role: plan.count(role) for role in plan.roles} for plan in plans},
            'skipped': skipped,
            'splits': os.path.join(args.out, 'splits.csv'),
        })
        return 0

    report = run_protocol(args.data, run_cfg, jobs=args.jobs, writers=args.writer)
    write_json(os.path.join(args.out, 'report.json'), report.to_dict())
    write_csv(os.path.join(args.out, 'writers.csv'), report.to_frame(), WRITER_COLUMNS)
    write_csv(os.path.join(args.out, 'scores.csv'), report.scores, SCORE_COLUMNS)
    write_text(os.path.join(args.out, 'summary.txt'), report.to_text())
    for writer_id, rows in report.telemetry.items():
        write_csv(os.path.join(args.out, 'telemetry', f'{writer_id}.csv'), rows, TELEMETRY_COLUMNS)

    print(report.to_text(), end='')
    return 0


def cmd_latent_plot(args):
    """Plot one writer's 2-d latent space."""
    run_cfg = load_run_config(args.config)
    handler = require_dataset(args.data)
    plans, skipped = plan_protocol(handler, run_cfg.protocol, handler.read_manifest(), [args.writer])
    if not plans:
        raise DataError(f"writer {args.writer} cannot be used: {skipped[0]['reason']}")
    split = build_split(plans[0], ImageLoader(handler, run_cfg.preprocess))

    if args.model:
        vae, _, _ = load_model(args.model)
        if vae.config.latent_dim != 2:
            raise ConfigError(f"{args.model} has a {vae.config.latent_dim}-d latent space; "
                              "latent-plot draws the latent space directly and needs LATENT_DIM=2")
    else:
        if run_cfg.train.latent_dim != 2:
            raise ConfigError(f"LATENT_DIM is {run_cfg.train.latent_dim}; "
                              "latent-plot draws the latent space directly and needs LATENT_DIM=2")
        train_cfg = replace(run_cfg.train, eta2=0.0) if args.without_fd else run_cfg.train
        vae, _ = train_writer(split, train_cfg)

    score = latent_plot(vae, split, run_cfg.seed, args.out)
    emit({
        'writer_id': args.writer,
        'separation_score': None if np.isnan(score) else score,
        'feature_disentangling': not args.without_fd,
        'svg': args.out,
    })
    return 0


def cmd_validate(args):
    """Check a dataset's layout, images and counts."""
    run_cfg = load_run_config(args.config)
    protocol = run_cfg.protocol
    results = DatasetValidator.validate(
        args.data, min_genuine=protocol.min_genuine, min_skilled=protocol.min_skilled,
    )
    for warning in results['warnings']:
        logger.warning(warning)
    for error in results['errors']:
        logger.error(f"✗ {error}")
    emit(results)
    return 0 if results['valid'] else DataError.exit_code


def build_parser():
    parser = CliParser(prog='fdv', description=Config.APP_NAME)
    parser.add_argument('-v', '--verbose', action='store_true', help='log at DEBUG level')
    commands = parser.add_subparsers(dest='command', required=True)

    p = commands.add_parser('gen-synthetic', help='generate a synthetic signature corpus')
    p.add_argument('--spec', help='corpus spec file (defaults when omitted)')
    p.add_argument('--out', required=True, help='target directory')
    p.add_argument('--force', action='store_true', help='overwrite a nonempty target')
    p.add_argument('--jobs', type=int, default=Config.DEFAULT_JOBS)
    p.set_defaults(handler=cmd_gen_synthetic)

    p = commands.add_parser('train', help='train per-writer models')
    p.add_argument('--data', required=True)
    p.add_argument('--config', required=True)
    p.add_argument('--out', required=True, help='model directory')
    p.add_argument('--writer', help='train only this writer')
    p.add_argument('--jobs', type=int, default=Config.DEFAULT_JOBS)
    p.set_defaults(handler=cmd_train)

    p = commands.add_parser('verify', help='score a questioned signature')
    p.add_argument('--model', required=True)
    p.add_argument('--image', required=True)
    p.add_argument('--seed', type=int, help='feature-draw seed (derived from the image name when omitted)')
    p.set_defaults(handler=cmd_verify)

    p = commands.add_parser('evaluate', help='run the evaluation protocol')
    p.add_argument('--data', required=True)
    p.add_argument('--config', required=True)
    p.add_argument('--out', required=True, help='report directory')
    p.add_argument('--writer', action='append', help='restrict to a writer (repeatable)')
    p.add_argument('--jobs', type=int, default=Config.DEFAULT_JOBS)
    p.add_argument('--dry-run', action='store_true', help='only write the split dump')
    p.set_defaults(handler=cmd_evaluate)

    p = commands.add_parser('latent-plot', help='plot a writer\'s 2-d latent space as SVG')
    p.add_argument('--data', required=True)
    p.add_argument('--config', required=True)
    p.add_argument('--writer', required=True)
    p.add_argument('--out', required=True, help='SVG file')
    p.add_argument('--model', help='plot a persisted model instead of training one')
    p.add_argument('--without-fd', action='store_true', help='train without the disentangling loss')
    p.set_defaults(handler=cmd_latent_plot)

    p = commands.add_parser('validate', help='check a dataset')
    p.add_argument('--data', required=True)
    p.add_argument('--config', help='run config whose protocol sets the minimum counts')
    p.set_defaults(handler=cmd_validate)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else Config.LOG_LEVEL,
        format='%(levelname)s %(name)s: %(message)s',
        stream=sys.stderr,
    )
    if getattr(args, 'jobs', 1) < 1:
        parser.error('--jobs must be >= 1')

    try:
        return args.handler(args)
    except FdvError as e:
        logger.error(f"✗ {e}")
        return e.exit_code
    except ArithmeticError as e:
        logger.error(f"✗ numeric failure: {e}")
        return 3
    except ValueError as e:
        logger.error(f"✗ {e}")
        return 1
    except OSError as e:
        logger.error(f"✗ {e}")
        return 2


if __name__ == '__main__':
    sys.exit(main())
