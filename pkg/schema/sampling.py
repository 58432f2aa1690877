from pydantic import BaseModel, Field, model_validator


class InpaintConfig(BaseModel):
    """Settings of the Metropolis-within-Gibbs inpainting sampler."""
    sweeps: int = Field(default=100, ge=1)
    block_size: int = Field(default=5, ge=1)
    block_overlap: int = Field(default=2, ge=0)
    local_window: int = Field(default=19, ge=1)
    init_candidates: int = Field(default=5, ge=1)
    flip_between_sweeps: bool = True

    @model_validator(mode="after")
    def check_geometry(self) -> "InpaintConfig":
        if self.block_overlap >= self.block_size:
            raise ValueError(
                f"block_overlap ({self.block_overlap}) must be smaller than block_size ({self.block_size})"
            )
        if self.local_window < self.block_size:
            raise ValueError(
                f"local_window ({self.local_window}) must be at least block_size ({self.block_size})"
            )
        return self

    @property
    def block_stride(self) -> int:
        return self.block_size - self.block_overlap


class Box(BaseModel):
    """Half-open pixel rectangle [top, bottom) x [left, right)."""
    top: int = Field(ge=0)
    left: int = Field(ge=0)
    bottom: int
    right: int

    @model_validator(mode="after")
    def check_extent(self) -> "Box":
        if self.bottom <= self.top or self.right <= self.left:
            raise ValueError(f"Empty box: rows [{self.top}, {self.bottom}), cols [{self.left}, {self.right})")
        return self

    @property
    def slices(self):
        return slice(self.top, self.bottom), slice(self.left, self.right)

    @property
    def shape(self):
        return self.bottom - self.top, self.right - self.left

    def contains(self, other: "Box") -> bool:
        return (self.top <= other.top and self.left <= other.left
                and other.bottom <= self.bottom and other.right <= self.right)

    def relative_to(self, outer: "Box") -> "Box":
        """This box in the coordinates of `outer`."""
        return Box(top=self.top - outer.top, left=self.left - outer.left,
                   bottom=self.bottom - outer.top, right=self.right - outer.left)
