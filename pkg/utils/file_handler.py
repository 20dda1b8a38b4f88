import io
import json
import logging
import os
import tempfile

import numpy as np
import pandas as pd
from PIL import Image, UnidentifiedImageError

from signature.preprocess import GrayImage
from .errors import DataError

logger = logging.getLogger(__name__)

WRITERS_DIR = 'writers'
IMAGE_KINDS = ('genuine', 'skilled')
MANIFEST_NAMES = ('manifest.csv', 'manifest.xlsx')
MANIFEST_COLUMNS = ('writer_id', 'image_id', 'role')


def atomic_write_bytes(path, data):
    """
    Write ``data`` to ``path`` through a temp file in the same directory.

    Args:
        path (str): Destination file
        data (bytes): Content
    """
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp_path = tempfile.mkstemp(dir=directory, prefix='.tmp-')
    try:
        with os.fdopen(fd, 'wb') as f:
            f.write(data)
        os.replace(tmp_path, path)
    except Exception:
        if os.path.exists(tmp_path):
            os.remove(tmp_path)
        raise


def write_text(path, text):
    atomic_write_bytes(path, text.encode('utf-8'))


def write_json(path, payload):
    write_text(path, json.dumps(payload, indent=2, sort_keys=True) + '\n')


def write_csv(path, rows, columns):
    """
    Write rows (list of dicts or DataFrame) as CSV with a fixed header.

    Args:
        path (str): Destination file
        rows (list or pandas.DataFrame): Records
        columns (list): Column order of the header
    """
    df = rows if isinstance(rows, pd.DataFrame) else pd.DataFrame(list(rows), columns=list(columns))
    write_text(path, df.to_csv(index=False, columns=list(columns), lineterminator='\n'))


def luma(rgb):
    """round(0.299 R + 0.587 G + 0.114 B) for an (h, w, 3) array."""
    rgb = rgb.astype(np.float64)
    value = 0.299 * rgb[..., 0] + 0.587 * rgb[..., 1] + 0.114 * rgb[..., 2]
    return np.floor(value + 0.5).astype(np.uint8)


class DatasetHandler:
    """
    Access to a dataset laid out as writers/<id>/{genuine,skilled}/*.{png,pgm}.
    """

    def __init__(self, root):
        """
        Initialize DatasetHandler for a dataset root directory.

        Args:
            root (str): Dataset root containing the ``writers`` directory
        """
        self.root = root
        self.allowed_extensions = {'png', 'pgm'}

    def allowed_file(self, filename):
        """
        Check whether a file name has an image extension we can read.

        Args:
            filename (str): File name

        Returns:
            bool: True if the extension is allowed
        """
        if not filename:
            return False
        return '.' in filename and \
               filename.rsplit('.', 1)[1].lower() in self.allowed_extensions

    @property
    def writers_path(self):
        return os.path.join(self.root, WRITERS_DIR)

    def exists(self):
        return os.path.isdir(self.writers_path)

    def list_writers(self):
        """
        Returns:
            list: Sorted writer ids (directory names)

        Raises:
            DataError: If the layout root is missing
        """
        if not self.exists():
            raise DataError(f"no '{WRITERS_DIR}' directory under {self.root}")
        return sorted(
            name for name in os.listdir(self.writers_path)
            if os.path.isdir(os.path.join(self.writers_path, name))
        )

    def list_images(self, writer_id, kind):
        """
        List the images of one writer and kind.

        Args:
            writer_id (str): Writer directory name
            kind (str): 'genuine' or 'skilled'

        Returns:
            list: Sorted (image_id, path) tuples; image_id is the file stem
        """
        if kind not in IMAGE_KINDS:
            raise ValueError(f"image kind must be one of {IMAGE_KINDS}, got '{kind}'")
        directory = os.path.join(self.writers_path, writer_id, kind)
        if not os.path.isdir(directory):
            return []
        return [
            (name.rsplit('.', 1)[0], os.path.join(directory, name))
            for name in sorted(os.listdir(directory))
            if self.allowed_file(name)
        ]

    @staticmethod
    def read_image(path):
        """
        Read an 8-bit grayscale image; color inputs are reduced to luma.

        Args:
            path (str): PNG or PGM file

        Returns:
            GrayImage: Pixel grid

        Raises:
            DataError: If the file cannot be decoded
        """
        try:
            with Image.open(path) as img:
                img.load()
                if img.mode == 'L':
                    pixels = np.asarray(img)
                elif img.mode == '1':
                    pixels = np.asarray(img.convert('L'))
                elif img.mode == 'LA':
                    pixels = np.asarray(img)[..., 0]
                elif img.mode in ('RGB', 'RGBA', 'P', 'CMYK', 'YCbCr'):
                    pixels = luma(np.asarray(img.convert('RGB')))
                else:
                    raise DataError(f"unsupported image mode {img.mode} in {path}")
        except (OSError, UnidentifiedImageError, SyntaxError) as e:
            raise DataError(f"cannot read image {path}: {e}")
        return GrayImage(pixels)

    @staticmethod
    def save_image(path, img):
        """Write a GrayImage as PNG (or PGM by extension) atomically."""
        fmt = 'PPM' if path.lower().endswith('.pgm') else 'PNG'
        buffer = io.BytesIO()
        Image.fromarray(img.pixels).save(buffer, format=fmt)
        atomic_write_bytes(path, buffer.getvalue())

    def find_manifest(self):
        for name in MANIFEST_NAMES:
            path = os.path.join(self.root, name)
            if os.path.isfile(path):
                return path
        return None

    def read_manifest(self, path=None):
        """
        Read the optional split manifest (CSV or Excel).

        Args:
            path (str, optional): Explicit manifest path; searched when None

        Returns:
            pandas.DataFrame or None: writer_id, image_id, role columns
        """
        path = path or self.find_manifest()
        if path is None:
            return None

        extension = path.rsplit('.', 1)[1].lower()
        if extension == 'csv':
            df = self._read_csv(path)
        else:
            try:
                df = pd.read_excel(path, engine='openpyxl', dtype=str)
            except Exception as e:
                raise DataError(f"Error reading Excel manifest {path}: {str(e)}")

        df.columns = [str(c).strip().lower() for c in df.columns]
        missing = [c for c in MANIFEST_COLUMNS if c not in df.columns]
        if missing:
            raise DataError(f"manifest {path} lacks columns: {', '.join(missing)}")
        df = df[list(MANIFEST_COLUMNS)].dropna().astype(str)
        return df.apply(lambda col: col.str.strip())

    def _read_csv(self, path):
        # Try different encodings
        encodings = ['utf-8', 'utf-8-sig', 'latin1', 'cp1252']
        for encoding in encodings:
            try:
                return pd.read_csv(path, encoding=encoding, dtype=str)
            except UnicodeDecodeError:
                continue
            except pd.errors.EmptyDataError:
                raise DataError(f"manifest {path} is empty")
        raise DataError(f"Unable to read manifest {path}. Please check file encoding.")
