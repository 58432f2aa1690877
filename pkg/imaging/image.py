"""
Grayscale image type and its codecs.

Two on-disk formats are supported:
- P5 portable graymap (8-bit binary), read as raw integer intensities
- FGRD float grid: b"FGRD\\n", b"v1 <height> <width>\\n", then height*width
  little-endian float32 values in row-major order
"""

import logging
import re
from pathlib import Path
from typing import Union

import numpy as np
from pydantic import BaseModel, ConfigDict, field_validator

from misc.constants import FGRD_VERSION, LOGGER_NAME, PGM_MAX_VALUE, FileMagic
from misc.exceptions import DomainError, ImageFormatError

logger = logging.getLogger(f"{LOGGER_NAME}.imaging")

_PGM_TOKEN = re.compile(rb"\s*(?:#[^\n]*\n\s*)*(\S+)")


class Image(BaseModel):
    """A real-valued grayscale image stored as a (height, width) float64 array."""
    values: np.ndarray

    model_config = ConfigDict(arbitrary_types_allowed=True)

    @field_validator("values", mode="before")
    @classmethod
    def coerce_values(cls, value) -> np.ndarray:
        array = np.array(value, dtype=np.float64)
        if array.ndim != 2 or array.shape[0] < 1 or array.shape[1] < 1:
            raise ValueError(f"Image values must be a non-empty 2-D grid, got shape {array.shape}")
        if not np.all(np.isfinite(array)):
            raise ValueError("Image values must be finite")
        return array

    @property
    def height(self) -> int:
        return self.values.shape[0]

    @property
    def width(self) -> int:
        return self.values.shape[1]

    @property
    def shape(self):
        return self.values.shape


def _read_pgm_token(data: bytes, position: int):
    match = _PGM_TOKEN.match(data, position)
    if match is None:
        raise ImageFormatError("Malformed PGM header", position)
    return match.group(1), match.end()


def _load_pgm(data: bytes) -> Image:
    position = len(FileMagic.PGM)
    fields = []
    for name in ("width", "height", "max-value"):
        token, end = _read_pgm_token(data, position)
        if not token.isdigit():
            raise ImageFormatError(f"Malformed PGM {name} {token!r}", end - len(token))
        fields.append(int(token))
        position = end
    width, height, max_value = fields
    if max_value != PGM_MAX_VALUE:
        raise ImageFormatError(f"Unsupported PGM max-value {max_value}", position - len(str(max_value)))
    if width < 1 or height < 1:
        raise ImageFormatError(f"Invalid PGM size {width}x{height}", position)
    if position >= len(data) or not data[position:position + 1].isspace():
        raise ImageFormatError("Missing whitespace after PGM header", position)
    # Exactly one whitespace byte separates the header from the raster
    position += 1
    expected = width * height
    payload = data[position:]
    if len(payload) < expected:
        raise ImageFormatError(f"Truncated PGM payload, expected {expected} bytes, got {len(payload)}", len(data))
    if len(payload) > expected:
        raise ImageFormatError("Trailing bytes after PGM payload", position + expected)
    values = np.frombuffer(payload, dtype=np.uint8).reshape(height, width)
    return Image(values=values.astype(np.float64))


def _load_fgrd(data: bytes) -> Image:
    position = len(FileMagic.FGRD)
    newline = data.find(b"\n", position)
    if newline < 0:
        raise ImageFormatError("Missing FGRD version line", position)
    parts = data[position:newline].split(b" ")
    if len(parts) != 3 or parts[0].decode("ascii", "replace") != FGRD_VERSION:
        raise ImageFormatError(f"Malformed FGRD version line {data[position:newline]!r}", position)
    if not (parts[1].isdigit() and parts[2].isdigit()):
        raise ImageFormatError("Malformed FGRD dimensions", position)
    height, width = int(parts[1]), int(parts[2])
    if height < 1 or width < 1:
        raise ImageFormatError(f"Invalid FGRD size {height}x{width}", position)
    position = newline + 1
    expected = 4 * height * width
    payload = data[position:]
    if len(payload) < expected:
        raise ImageFormatError(f"Truncated FGRD payload, expected {expected} bytes, got {len(payload)}", len(data))
    if len(payload) > expected:
        raise ImageFormatError("Trailing bytes after FGRD payload", position + expected)
    values = np.frombuffer(payload, dtype="<f4").reshape(height, width)
    if not np.all(np.isfinite(values)):
        raise ImageFormatError("FGRD payload contains non-finite values", position)
    return Image(values=values.astype(np.float64))


def load_image(data: bytes) -> Image:
    """
    Decode a P5 graymap or an FGRD float grid.

    8-bit inputs are returned as raw intensities in [0, 255]; dequantization is
    a separate step.

    Args:
        data: The encoded image

    Returns:
        The decoded Image

    Raises:
        ImageFormatError: If the header is malformed, the payload is truncated
            or the max-value is not 255
    """
    if data.startswith(FileMagic.FGRD):
        return _load_fgrd(data)
    if data.startswith(FileMagic.PGM):
        return _load_pgm(data)
    raise ImageFormatError("Unknown image magic", 0)


def save_image(image: Image, fmt: str = "fgrd") -> bytes:
    """
    Encode an image as FGRD (bit-exact for float32 values) or P5 graymap.

    Raises:
        DomainError: If a PGM is requested for values that are not integers in [0, 255]
    """
    height, width = image.shape
    if fmt == "fgrd":
        header = FileMagic.FGRD + f"{FGRD_VERSION} {height} {width}\n".encode("ascii")
        return header + image.values.astype("<f4").tobytes()
    if fmt == "pgm":
        values = image.values
        if np.any(values != np.round(values)) or values.min() < 0 or values.max() > PGM_MAX_VALUE:
            raise DomainError("PGM output requires integer values in [0, 255]; quantize the image first")
        header = FileMagic.PGM + f"\n{width} {height}\n{PGM_MAX_VALUE}\n".encode("ascii")
        return header + values.astype(np.uint8).tobytes()
    raise DomainError(f"Unsupported image format: {fmt}")


def _format_for(path: Path) -> str:
    return "pgm" if path.suffix.lower() == ".pgm" else "fgrd"


def load_image_file(path: Union[str, Path]) -> Image:
    """Read an image file; the format is detected from its magic."""
    path = Path(path)
    logger.debug(f"Loading image {path}")
    return load_image(path.read_bytes())


def save_image_file(path: Union[str, Path], image: Image) -> None:
    """Write an image file; `.pgm` selects P5, anything else FGRD."""
    path = Path(path)
    path.write_bytes(save_image(image, _format_for(path)))
    logger.debug(f"Wrote {image.height}x{image.width} image to {path}")


def is_quantized(image: Image) -> bool:
    """True if every value is an integer in [0, 255]."""
    values = image.values
    return bool(np.all(values == np.round(values)) and values.min() >= 0 and values.max() <= PGM_MAX_VALUE)


def dequantize(img8: Image, rng: np.random.Generator) -> Image:
    """
    Turn 8-bit intensities into reals in [0, 1) by adding uniform noise.

    Each output value is (v + u) / 256 with u ~ Uniform[0, 1) drawn
    independently per pixel.

    Raises:
        DomainError: If any value is not an integer in [0, 255]
    """
    if not is_quantized(img8):
        raise DomainError("dequantize expects integer intensities in [0, 255]")
    noise = rng.random(img8.shape)
    return Image(values=(img8.values + noise) / (PGM_MAX_VALUE + 1))


def quantize(image: Image) -> Image:
    """Map intensities in [0, 1) to integers floor(256 v), clipped to [0, 255]."""
    values = np.clip(np.floor(image.values * (PGM_MAX_VALUE + 1)), 0, PGM_MAX_VALUE)
    return Image(values=values)
