"""
FDV1 model container.

Layout: magic b"FDV1", a little-endian uint32 header length, the UTF-8 JSON
header, then little-endian float64 data: every VAE parameter in declared
order, followed by the SVM section (gamma, bias, support vectors row-major,
dual coefficients).
"""
import json
import struct

import numpy as np

from classifier.svm import SvmModel
from feature_extractor.vae import VaeConfig, VaeModel
from .errors import DataError
from .file_handler import atomic_write_bytes

MAGIC = b'FDV1'
CONTAINER_VERSION = 1
MODEL_SUFFIX = '.fdv'
_FLOAT = np.dtype('<f8')


def encode_model(vae, svm, meta=None):
    """
    Serialize a trained (VaeModel, SvmModel) pair.

    Args:
        vae (VaeModel): Feature extractor
        svm (SvmModel): Classifier
        meta (dict, optional): Extra JSON-serializable header fields

    Returns:
        bytes: Container content
    """
    shapes = vae.config.parameter_shapes()
    header = {
        'container_version': CONTAINER_VERSION,
        'vae': {
            'config': vae.config.to_dict(),
            'parameters': [[name, list(shape)] for name, shape in shapes],
        },
        'svm': {
            'n_support': int(svm.n_support),
            'dim': int(svm.support_vectors.shape[1]) if svm.n_support else vae.config.latent_dim,
            'converged': bool(svm.converged),
            'support_indices': [int(i) for i in svm.support_indices],
            'box': [float(c) for c in svm.box],
        },
        'meta': meta or {},
    }
    header_bytes = json.dumps(header, sort_keys=True, separators=(',', ':')).encode('utf-8')

    chunks = [MAGIC, struct.pack('<I', len(header_bytes)), header_bytes]
    for name, shape in shapes:
        value = vae.params[name]
        if value.shape != tuple(shape):
            raise ValueError(f"parameter {name} has shape {value.shape}, expected {tuple(shape)}")
        chunks.append(np.ascontiguousarray(value, dtype=_FLOAT).tobytes())
    chunks.append(np.array([svm.gamma, svm.bias], dtype=_FLOAT).tobytes())
    chunks.append(np.ascontiguousarray(svm.support_vectors, dtype=_FLOAT).tobytes())
    chunks.append(np.ascontiguousarray(svm.dual_coeffs, dtype=_FLOAT).tobytes())
    return b''.join(chunks)


def decode_model(data, source='<bytes>'):
    """
    Parse container bytes.

    Returns:
        tuple: (VaeModel, SvmModel, header dict)

    Raises:
        DataError: On a bad magic, truncated data or malformed header
    """
    if len(data) < 8 or data[:4] != MAGIC:
        raise DataError(f"{source} is not an FDV1 model file")
    (header_len,) = struct.unpack('<I', data[4:8])
    try:
        header = json.loads(data[8:8 + header_len].decode('utf-8'))
        config = header['vae']['config']
        vae_config = VaeConfig(
            input_dim=config['input_dim'],
            hidden_dims=tuple(config['hidden_dims']),
            latent_dim=config['latent_dim'],
            kl_weight=config['kl_weight'],
        )
        layout = [(name, tuple(int(n) for n in shape)) for name, shape in header['vae']['parameters']]
        svm_header = header['svm']
        n_sv, dim = int(svm_header['n_support']), int(svm_header['dim'])
        converged = bool(svm_header['converged'])
        support_indices = np.asarray(svm_header['support_indices'], dtype=np.int64)
        box = tuple(float(c) for c in svm_header.get('box', (1.0, 1.0)))
    except (UnicodeDecodeError, ValueError, KeyError, TypeError) as e:
        raise DataError(f"{source}: malformed FDV1 header ({e})")

    offset = 8 + header_len

    def take(count):
        nonlocal offset
        end = offset + count * _FLOAT.itemsize
        if end > len(data):
            raise DataError(f"{source}: truncated FDV1 data")
        values = np.frombuffer(data[offset:end], dtype=_FLOAT).astype(np.float64)
        offset = end
        return values

    params = {}
    for name, shape in layout:
        params[name] = take(int(np.prod(shape))).reshape(shape)

    gamma, bias = take(2)
    support_vectors = take(n_sv * dim).reshape(n_sv, dim)
    dual_coeffs = take(n_sv)
    if offset != len(data):
        raise DataError(f"{source}: {len(data) - offset} trailing bytes after FDV1 data")

    svm = SvmModel(
        support_vectors=support_vectors,
        dual_coeffs=dual_coeffs,
        bias=float(bias),
        gamma=float(gamma),
        converged=converged,
        support_indices=support_indices,
        box=box,
    )
    return VaeModel(config=vae_config, params=params), svm, header


def save_model(path, vae, svm, meta=None):
    """Write the container atomically; returns the bytes written."""
    data = encode_model(vae, svm, meta)
    atomic_write_bytes(path, data)
    return data


def load_model(path):
    """
    Returns:
        tuple: (VaeModel, SvmModel, header dict)

    Raises:
        DataError: If the file is missing or malformed
    """
    try:
        with open(path, 'rb') as f:
            data = f.read()
    except OSError as e:
        raise DataError(f"cannot read model {path}: {e}")
    return decode_model(data, source=path)
