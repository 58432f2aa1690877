from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator
from typing import List, Tuple

from misc.constants import DEAD_LEAVES_DEFAULTS, DEFAULT_NEIGHBORHOOD_WIDTH, DEFAULT_ROWS_ABOVE


class NeighborhoodSpec(BaseModel):
    """
    Geometry of the causal neighborhood of a pixel.

    For pixel (i, j) the neighborhood holds every pixel in rows i-rows_above..i-1
    inside the centered window of the given width, followed by the width // 2
    pixels to the left of (i, j) in the current row. Offsets are listed in
    raster order.
    """
    width: int = Field(default=DEFAULT_NEIGHBORHOOD_WIDTH, ge=1)
    rows_above: int = Field(default=DEFAULT_ROWS_ABOVE, ge=1)

    model_config = ConfigDict(frozen=True)

    @field_validator("width")
    @classmethod
    def width_must_be_odd(cls, value: int) -> int:
        if value % 2 != 1:
            raise ValueError(f"Neighborhood width must be odd, got {value}")
        return value

    @property
    def half_width(self) -> int:
        return self.width // 2

    @property
    def dim(self) -> int:
        """Dimensionality D of the context vector."""
        return self.rows_above * self.width + self.half_width

    @property
    def offsets(self) -> List[Tuple[int, int]]:
        """Relative (di, dj) offsets in raster order."""
        offsets = [
            (di, dj)
            for di in range(-self.rows_above, 0)
            for dj in range(-self.half_width, self.half_width + 1)
        ]
        offsets.extend((0, dj) for dj in range(-self.half_width, 0))
        return offsets


class DeadLeavesConfig(BaseModel):
    """Parameters of the dead-leaves generator (occluding random disks)."""
    size: int = Field(default=DEAD_LEAVES_DEFAULTS["size"], ge=1)
    disk_count: int = Field(default=DEAD_LEAVES_DEFAULTS["disk_count"], ge=0)
    radius_min: float = Field(default=DEAD_LEAVES_DEFAULTS["radius_min"], gt=0)
    radius_max: float = Field(default=DEAD_LEAVES_DEFAULTS["radius_max"], gt=0)
    radius_exponent: float = DEAD_LEAVES_DEFAULTS["radius_exponent"]
    intensity_range: Tuple[float, float] = DEAD_LEAVES_DEFAULTS["intensity_range"]
    background: float = Field(default=DEAD_LEAVES_DEFAULTS["background"], ge=0, le=1)

    model_config = ConfigDict(frozen=True)

    @model_validator(mode="after")
    def check_ranges(self) -> "DeadLeavesConfig":
        if self.radius_min > self.radius_max:
            raise ValueError(f"radius_min ({self.radius_min}) exceeds radius_max ({self.radius_max})")
        low, high = self.intensity_range
        if not 0.0 <= low <= high <= 1.0:
            raise ValueError(f"intensity_range must lie within [0, 1], got {self.intensity_range}")
        return self
