"""
Image sources for patch signals: binary PGM files and a seeded synthetic image.
"""
import logging
import re
from pathlib import Path

import numpy as np

from src.domain.ports.image_source_port import ImageSourcePort
from src.shared.exceptions import FileSystemException, ValidationException

logger = logging.getLogger(__name__)

_HEADER_TOKEN = re.compile(rb"(?:\s|#[^\n]*\n)*(\S+)")


class PgmImageSource(ImageSourcePort):
    """8-bit binary (P5) PGM file."""

    def __init__(self, path: Path):
        self.path = Path(path)
        self._image = None

    @property
    def name(self) -> str:
        return self.path.name

    def load(self) -> np.ndarray:
        if self._image is not None:
            return self._image
        try:
            data = self.path.read_bytes()
        except OSError as e:
            raise FileSystemException(f"Cannot read image: {str(e)}", file_path=str(self.path), cause=e)
        self._image = parse_pgm(data)
        self._image.setflags(write=False)
        return self._image


def parse_pgm(data: bytes) -> np.ndarray:
    tokens = []
    position = 0
    for _ in range(4):
        match = _HEADER_TOKEN.match(data, position)
        if match is None:
            raise ValidationException("Truncated PGM header", field="image")
        tokens.append(match.group(1))
        position = match.end()
    if tokens[0] != b"P5":
        raise ValidationException("Only binary P5 PGM images are supported", field="image", value=tokens[0].decode())
    try:
        width, height, maxval = (int(token) for token in tokens[1:])
    except ValueError:
        raise ValidationException("Malformed PGM header", field="image")
    if not 0 < maxval < 256:
        raise ValidationException("Only 8-bit PGM images are supported", field="maxval", value=maxval)
    # a single whitespace byte separates the header from the raster
    if len(data) < position + 1 + width * height:
        raise ValidationException("PGM raster is shorter than its header declares", field="image")
    pixels = np.frombuffer(data, dtype=np.uint8, count=width * height, offset=position + 1)
    return pixels.reshape(height, width).astype(float) * (255.0 / maxval)


def encode_pgm(image: np.ndarray) -> bytes:
    """P5 encoding of a 2D array with values in [0, 255]."""
    pixels = np.clip(np.rint(image), 0, 255).astype(np.uint8)
    height, width = pixels.shape
    return f"P5\n{width} {height}\n255\n".encode() + pixels.tobytes()


class SyntheticImageSource(ImageSourcePort):
    """Piecewise-smooth grayscale image with texture noise, fixed by its seed.

    Smooth shaded regions with sharp edges give DCT and Haar coefficients with
    a fast but dense decay, similar to natural images.
    """

    def __init__(self, size: int = 256, seed: int = 0, regions: int = 12, texture: float = 6.0):
        if size < 8:
            raise ValidationException("Synthetic image must be at least 8 pixels wide", field="size", value=size)
        self.size = size
        self.seed = seed
        self.regions = regions
        self.texture = texture
        self._image = None

    @property
    def name(self) -> str:
        return f"synthetic-{self.size}-seed{self.seed}"

    def load(self) -> np.ndarray:
        if self._image is not None:
            return self._image
        rng = np.random.default_rng(self.seed)
        rows, cols = np.mgrid[0:self.size, 0:self.size] / self.size
        image = 128.0 + 60.0 * (rows - 0.5) + 40.0 * np.sin(2.0 * np.pi * cols)
        for _ in range(self.regions):
            cy, cx = rng.uniform(0.0, 1.0, 2)
            radius = rng.uniform(0.05, 0.3)
            level = rng.uniform(-80.0, 80.0)
            slope_y, slope_x = rng.uniform(-60.0, 60.0, 2)
            if rng.uniform() < 0.5:
                inside = (rows - cy) ** 2 + (cols - cx) ** 2 <= radius ** 2
            else:
                inside = (np.abs(rows - cy) <= radius) & (np.abs(cols - cx) <= 0.6 * radius)
            image = np.where(inside, level + 128.0 + slope_y * (rows - cy) + slope_x * (cols - cx), image)
        image = image + self.texture * rng.standard_normal(image.shape)
        logger.debug(f"Generated {self.name}")
        self._image = np.clip(image, 0.0, 255.0)
        self._image.setflags(write=False)
        return self._image
