"""Binary PGM (P5, 8-bit) image input and output.

Pixels live in ``[0, 1]`` inside the library; quantization to 8 bits happens
only here.
"""

import numpy as np
from PIL import Image

from .errors import ContractError


def read_pgm(path):
    """Read an 8-bit binary PGM file as a float64 array with values in [0, 1]."""
    try:
        with Image.open(path) as im:
            if im.format != "PPM" or im.mode != "L":
                raise ContractError(f"{path}: expected an 8-bit grayscale PGM, got {im.format} {im.mode}")
            data = np.asarray(im, dtype=np.float64)
    except (OSError, ValueError) as exc:
        if isinstance(exc, ContractError):
            raise
        raise OSError(f"cannot read image {path}: {exc}") from exc
    return data / 255.0


def to_uint8(image):
    return np.round(np.clip(np.asarray(image, dtype=np.float64), 0.0, 1.0) * 255.0).astype(np.uint8)


def write_pgm(path, image):
    """Write a 2-D array with values in [0, 1] as binary PGM (values are clipped)."""
    image = np.asarray(image)
    if image.ndim != 2:
        raise ContractError(f"expected a 2-D image, got shape {image.shape}")
    Image.fromarray(to_uint8(image), mode="L").save(path, format="PPM")
    return path
