"""
Two-dimensional latent scatter plots of genuine signatures, skilled
forgeries and random forgeries.
"""
import io
import logging

import matplotlib
import numpy as np

matplotlib.use('Agg')
import matplotlib.pyplot as plt  # noqa: E402

from feature_extractor.vae import extract_features  # noqa: E402
from utils.file_handler import atomic_write_bytes  # noqa: E402
from .metrics import separation_score  # noqa: E402
from .protocol import image_seed  # noqa: E402

logger = logging.getLogger(__name__)

CLASS_STYLES = {
    'genuine': {'marker': 'o', 'color': '#1f77b4'},
    'skilled': {'marker': '^', 'color': '#d62728'},
    'random': {'marker': 's', 'color': '#2ca02c'},
}
SVG_SETTINGS = {
    'svg.hashsalt': 'fdv-latent',
    'svg.fonttype': 'none',
    'path.simplify': False,
}


def _stack(*arrays):
    present = [a for a in arrays if a is not None and len(a)]
    return np.vstack(present) if present else []


def latent_features(vae, split, seed):
    """
    Feature vectors of a writer's images, one draw per image from its
    scoring seed.

    Args:
        vae (VaeModel): Model with a 2-d latent space
        split (WriterSplit): Writer images
        seed (int): Master seed

    Returns:
        dict: 'genuine' / 'skilled' / 'random' -> (n, 2) arrays
    """
    if vae.config.latent_dim != 2:
        raise ValueError(f"latent plots need latent_dim = 2, model has {vae.config.latent_dim}")

    groups = {
        'genuine': (_stack(split.genuine_train, split.genuine_test),
                    split.genuine_train_ids + split.genuine_test_ids),
        'skilled': (_stack(split.skilled_test), split.skilled_test_ids),
        'random': (_stack(split.random_forgeries, split.random_test),
                   split.random_forgery_ids + split.random_test_ids),
    }
    features = {}
    for name, (X, ids) in groups.items():
        rows = [
            extract_features(vae, x, np.random.default_rng(image_seed(seed, split.writer_id, image_id)))
            for x, image_id in zip(X, ids)
        ]
        if rows:
            features[name] = np.vstack(rows)
    return features


def render_latent_svg(features, title):
    """
    Scatter the classes into a standalone SVG document.

    Returns:
        bytes: SVG content, identical for identical inputs
    """
    with plt.rc_context(SVG_SETTINGS):
        fig, ax = plt.subplots(figsize=(6, 6))
        for name in ('genuine', 'skilled', 'random'):
            if name not in features:
                continue
            points = features[name]
            ax.scatter(points[:, 0], points[:, 1], s=24, alpha=0.8, label=name, **CLASS_STYLES[name])
        ax.set_xlabel('z1')
        ax.set_ylabel('z2')
        ax.set_title(title)
        ax.legend(loc='upper right')
        fig.tight_layout()

        buffer = io.BytesIO()
        fig.savefig(buffer, format='svg', metadata={'Date': None})
        plt.close(fig)
    return buffer.getvalue()


def latent_plot(vae, split, seed, out_path, title=None):
    """
    Write the latent scatter of one writer and measure class separation.

    Returns:
        float: separation score of the plotted classes
    """
    features = latent_features(vae, split, seed)
    score = separation_score(features) if len(features) > 1 else float('nan')
    title = title or f'writer {split.writer_id} latent space (separation {score:.3f})'
    atomic_write_bytes(out_path, render_latent_svg(features, title))
    logger.info(f"✓ latent plot written to {out_path}")
    return score
