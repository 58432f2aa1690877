from typing import List

from imaging.image import Image
from misc.exceptions import DomainError


def patch_corners(height: int, width: int, side: int, stride: int):
    """Top-left corners of all side x side patches at the given stride, raster order."""
    rows = range(0, height - side + 1, stride)
    cols = range(0, width - side + 1, stride)
    return [(r, c) for r in rows for c in cols]


def extract_patches(image: Image, side: int, stride: int) -> List[Image]:
    """
    Cut an image into axis-aligned square patches.

    Remainder regions smaller than `side` are discarded.

    Raises:
        DomainError: If side or stride is not positive, or side exceeds the image
    """
    if side < 1 or stride < 1:
        raise DomainError(f"Patch side and stride must be positive, got side={side}, stride={stride}")
    if side > min(image.height, image.width):
        raise DomainError(f"Patch side {side} exceeds the {image.height}x{image.width} image")
    return [
        Image(values=image.values[r:r + side, c:c + side])
        for r, c in patch_corners(image.height, image.width, side, stride)
    ]


def split_regions(image: Image, rows: int, cols: int) -> List[Image]:
    """
    Split an image into a rows x cols grid of equal regions (raster order).

    Pixels left over when the size is not divisible are dropped.
    """
    if rows < 1 or cols < 1:
        raise DomainError(f"Region grid must be at least 1x1, got {rows}x{cols}")
    region_h, region_w = image.height // rows, image.width // cols
    if region_h < 1 or region_w < 1:
        raise DomainError(f"Cannot split a {image.height}x{image.width} image into {rows}x{cols} regions")
    return [
        Image(values=image.values[r * region_h:(r + 1) * region_h, c * region_w:(c + 1) * region_w])
        for r in range(rows)
        for c in range(cols)
    ]
