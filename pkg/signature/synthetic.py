"""
Deterministic synthetic signature corpus.

Each writer owns a style of 3-7 cubic Bezier strokes. Genuine samples are
rendered with small Gaussian jitter on the control points; skilled forgeries
are rendered from a noisier copy of the style, the way a forger would
reproduce a signature they have only studied.
"""
import logging
import os
import shutil
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace

import numpy as np
from PIL import Image, ImageDraw

from utils.errors import DataError
from utils.file_handler import WRITERS_DIR, DatasetHandler, write_json
from .preprocess import GrayImage

logger = logging.getLogger(__name__)

SUPERSAMPLE = 4
CURVE_SAMPLES = 48


@dataclass(frozen=True)
class Stroke:
    points: np.ndarray  # (4, 2) control points on the unit canvas, (x, y)
    width: float        # fraction of canvas height
    intensity: int      # ink gray level, 0 = black


@dataclass(frozen=True)
class WriterStyle:
    seed: int
    strokes: tuple

    @property
    def stroke_count(self):
        return len(self.strokes)


@dataclass(frozen=True)
class CorpusSpec:
    n_writers: int = 20
    genuine_per_writer: int = 15
    skilled_per_writer: int = 10
    jitter_genuine: float = 0.01
    jitter_skilled: float = 0.04
    canvas_h: int = 96
    canvas_w: int = 192
    seed: int = 0

    def __post_init__(self):
        if not 0 < self.jitter_genuine < self.jitter_skilled:
            raise ValueError(
                f"need 0 < jitter_genuine < jitter_skilled, got {self.jitter_genuine}, {self.jitter_skilled}"
            )

    def to_dict(self):
        return {
            'n_writers': self.n_writers,
            'genuine_per_writer': self.genuine_per_writer,
            'skilled_per_writer': self.skilled_per_writer,
            'jitter_genuine': self.jitter_genuine,
            'jitter_skilled': self.jitter_skilled,
            'canvas_h': self.canvas_h,
            'canvas_w': self.canvas_w,
            'seed': self.seed,
        }


def gen_writer_style(seed):
    """
    Build a writer style from a seed.

    Strokes run left to right over a horizontal extent of at least 45% of
    the canvas, each a cubic Bezier segment with its own width and ink.

    Args:
        seed (int): Style seed

    Returns:
        WriterStyle: Deterministic in ``seed``
    """
    rng = np.random.default_rng(seed)
    n_strokes = int(rng.integers(3, 8))
    x_start = rng.uniform(0.05, 0.2)
    x_end = rng.uniform(0.65, 0.95)
    bounds = np.linspace(x_start, x_end, n_strokes + 1)
    baseline = rng.uniform(0.35, 0.65)

    strokes = []
    for k in range(n_strokes):
        overlap = 0.25 * (bounds[k + 1] - bounds[k])
        a = max(0.02, bounds[k] - overlap)
        b = min(0.98, bounds[k + 1] + overlap)
        xs = np.array([a, a + (b - a) / 3.0, a + 2.0 * (b - a) / 3.0, b])
        xs[1:3] += rng.normal(0.0, 0.05, size=2)
        ys = baseline + rng.uniform(-0.3, 0.3, size=4)
        points = np.clip(np.column_stack([xs, ys]), 0.02, 0.98)
        strokes.append(Stroke(
            points=points,
            width=float(rng.uniform(0.015, 0.035)),
            intensity=int(rng.integers(0, 70)),
        ))
    return WriterStyle(seed=int(seed), strokes=tuple(strokes))


def perturb_style(style, jitter, rng):
    """Copy of ``style`` with Gaussian noise of scale ``jitter`` on every control point."""
    strokes = tuple(
        replace(s, points=np.clip(s.points + rng.normal(0.0, jitter, size=s.points.shape), 0.02, 0.98))
        for s in style.strokes
    )
    return replace(style, strokes=strokes)


def _bezier(points, n):
    t = np.linspace(0.0, 1.0, n)[:, np.newaxis]
    u = 1.0 - t
    return (u ** 3) * points[0] + 3 * (u ** 2) * t * points[1] + 3 * u * (t ** 2) * points[2] + (t ** 3) * points[3]


def render(style, jitter, rng, canvas=(96, 192)):
    """
    Rasterize a jittered copy of ``style`` with dark ink on white paper.

    Strokes are drawn at 4x resolution and box-filtered down, which
    antialiases the edges.

    Args:
        style (WriterStyle): Style to draw
        jitter (float): Control-point noise scale, >= 0
        rng (np.random.Generator): Noise source
        canvas (tuple): (height, width) in pixels

    Returns:
        GrayImage: Rendered signature
    """
    if jitter < 0:
        raise ValueError(f"jitter must be >= 0, got {jitter}")
    height, width = canvas
    big_w, big_h = width * SUPERSAMPLE, height * SUPERSAMPLE
    page = Image.new('L', (big_w, big_h), 255)
    draw = ImageDraw.Draw(page)

    for stroke in style.strokes:
        points = stroke.points
        if jitter > 0:
            points = np.clip(points + rng.normal(0.0, jitter, size=points.shape), 0.0, 1.0)
        curve = _bezier(points, CURVE_SAMPLES) * np.array([big_w - 1, big_h - 1])
        pen = max(1, int(round(stroke.width * big_h)))
        draw.line([tuple(p) for p in curve], fill=stroke.intensity, width=pen, joint='curve')
        r = pen / 2.0
        for x, y in (curve[0], curve[-1]):
            draw.ellipse([x - r, y - r, x + r, y + r], fill=stroke.intensity)

    small = page.resize((width, height), Image.BOX)
    return GrayImage(np.asarray(small))


def _writer_seeds(spec, index):
    style_seed, genuine_seed, forger_seed = np.random.SeedSequence([spec.seed, index]).generate_state(3)
    return int(style_seed), int(genuine_seed), int(forger_seed)


def writer_id(index):
    return f'w{index + 1:03d}'


def _write_writer(spec, index, out_dir):
    style_seed, genuine_seed, forger_seed = _writer_seeds(spec, index)
    style = gen_writer_style(style_seed)
    wid = writer_id(index)
    canvas = (spec.canvas_h, spec.canvas_w)
    base = os.path.join(out_dir, WRITERS_DIR, wid)

    rng = np.random.default_rng(genuine_seed)
    for k in range(spec.genuine_per_writer):
        img = render(style, spec.jitter_genuine, rng, canvas)
        DatasetHandler.save_image(os.path.join(base, 'genuine', f'{wid}_g{k + 1:02d}.png'), img)

    rng = np.random.default_rng(forger_seed)
    for k in range(spec.skilled_per_writer):
        forged = perturb_style(style, spec.jitter_skilled, rng)
        img = render(forged, spec.jitter_genuine, rng, canvas)
        DatasetHandler.save_image(os.path.join(base, 'skilled', f'{wid}_s{k + 1:02d}.png'), img)
    return wid


def gen_corpus(spec, out_dir, force=False, jobs=1):
    """
    Write a synthetic corpus in the writers/<id>/{genuine,skilled} layout.

    Args:
        spec (CorpusSpec): What to generate
        out_dir (str): Target directory
        force (bool): Replace a nonempty target
        jobs (int): Writers rendered in parallel

    Returns:
        dict: Corpus summary

    Raises:
        DataError: If ``out_dir`` is nonempty and ``force`` is not set
    """
    if os.path.isdir(out_dir) and os.listdir(out_dir):
        if not force:
            raise DataError(f"target directory {out_dir} is not empty; use --force to overwrite")
        writers_path = os.path.join(out_dir, WRITERS_DIR)
        if os.path.isdir(writers_path):
            shutil.rmtree(writers_path)
    os.makedirs(out_dir, exist_ok=True)

    indices = range(spec.n_writers)
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            writers = list(pool.map(_write_writer, [spec] * spec.n_writers, indices, [out_dir] * spec.n_writers))
    else:
        writers = [_write_writer(spec, i, out_dir) for i in indices]

    summary = {
        'out_dir': out_dir,
        'writers': len(writers),
        'genuine_images': spec.n_writers * spec.genuine_per_writer,
        'skilled_images': spec.n_writers * spec.skilled_per_writer,
        'spec': spec.to_dict(),
    }
    write_json(os.path.join(out_dir, 'corpus.json'), summary)
    logger.info(f"✓ wrote {len(writers)} writers to {out_dir}")
    return summary
