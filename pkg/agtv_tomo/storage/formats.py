"""Binary encodings of images, sinograms and previews

image     b"AGTVIMG1" | u32 n | u32 reserved | n*n float64, row-major
sinogram  b"AGTVSIN1" | u32 p | u32 q        | p*q float64, angle-major
PGM       binary P5, 16-bit (maxval 65535), min-max scaled

All integers and floats are little-endian except the PGM samples, which the
format defines as big-endian.
"""

import struct

import numpy as np

IMAGE_MAGIC = b"AGTVIMG1"
SINOGRAM_MAGIC = b"AGTVSIN1"
_HEADER = struct.Struct("<8sII")
_PGM_MAX = 65535


def _decode(raw: bytes, magic: bytes, kind: str):
    if len(raw) < _HEADER.size:
        raise ValueError(f"Truncated {kind} file: {len(raw)} bytes")
    found, first, second = _HEADER.unpack_from(raw)
    if found != magic:
        raise ValueError(f"Not a {kind} file (magic {found!r})")
    return first, second, raw[_HEADER.size :]


def encode_image(img: np.ndarray) -> bytes:
    img = np.asarray(img, dtype="<f8")
    if img.ndim != 2 or img.shape[0] != img.shape[1]:
        raise ValueError(f"Image must be square, got shape {img.shape}")
    return _HEADER.pack(IMAGE_MAGIC, img.shape[0], 0) + img.tobytes(order="C")


def decode_image(raw: bytes) -> np.ndarray:
    n, _, payload = _decode(raw, IMAGE_MAGIC, "image")
    if len(payload) != n * n * 8:
        raise ValueError(f"Image payload has {len(payload)} bytes, expected {n * n * 8}")
    return np.frombuffer(payload, dtype="<f8").astype(np.float64).reshape(n, n)


def encode_sinogram(sino: np.ndarray) -> bytes:
    sino = np.asarray(sino, dtype="<f8")
    if sino.ndim != 2:
        raise ValueError(f"Sinogram must be a (q, p) array, got shape {sino.shape}")
    q, p = sino.shape
    return _HEADER.pack(SINOGRAM_MAGIC, p, q) + sino.tobytes(order="C")


def decode_sinogram(raw: bytes) -> np.ndarray:
    p, q, payload = _decode(raw, SINOGRAM_MAGIC, "sinogram")
    if len(payload) != p * q * 8:
        raise ValueError(f"Sinogram payload has {len(payload)} bytes, expected {p * q * 8}")
    return np.frombuffer(payload, dtype="<f8").astype(np.float64).reshape(q, p)


def encode_pgm(img: np.ndarray) -> bytes:
    """16-bit greyscale preview; a constant image maps to black."""
    img = np.asarray(img, dtype=np.float64)
    if img.ndim != 2:
        raise ValueError(f"PGM preview needs a 2-D image, got shape {img.shape}")
    lo, hi = float(img.min()), float(img.max())
    if hi > lo:
        scaled = np.rint((img - lo) / (hi - lo) * _PGM_MAX)
    else:
        scaled = np.zeros_like(img)
    rows, cols = img.shape
    header = f"P5\n{cols} {rows}\n{_PGM_MAX}\n".encode("ascii")
    return header + scaled.astype(">u2").tobytes()
