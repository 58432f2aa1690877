"""
Ensembles over pixel-grid transformations.

The ensemble density of an image is the mixture (1/K) sum_k p(T_k x) |det T_k|.
Every transform here permutes pixels, so log|det T_k| = 0.
"""

from typing import List

import numpy as np
from pydantic import BaseModel, Field
from scipy.special import logsumexp

from imaging.image import Image
from misc.exceptions import DomainError
from models.ride import RideModel, ride_log_density_batch


class GridTransform(BaseModel):
    """
    An element of the dihedral group of the square: an optional horizontal
    flip followed by `quarter_turns` counter-clockwise rotations.
    """
    name: str
    flip: bool = False
    quarter_turns: int = Field(default=0, ge=0, le=3)
    log_det: float = 0.0

    @property
    def needs_square(self) -> bool:
        return self.quarter_turns % 2 == 1

    def forward(self, values: np.ndarray) -> np.ndarray:
        """Apply to the last two axes of an array."""
        if self.flip:
            values = np.flip(values, axis=-1)
        return np.rot90(values, self.quarter_turns, axes=(-2, -1))

    def inverse(self, values: np.ndarray) -> np.ndarray:
        values = np.rot90(values, -self.quarter_turns, axes=(-2, -1))
        if self.flip:
            values = np.flip(values, axis=-1)
        return values


_DIHEDRAL = {
    "identity": (False, 0),
    "rot90": (False, 1),
    "rot180": (False, 2),
    "rot270": (False, 3),
    "flip_h": (True, 0),
    "transpose": (True, 1),
    "flip_v": (True, 2),
    "anti_transpose": (True, 3),
}

_NAMED_SETS = {
    "identity": ["identity"],
    "flips": ["identity", "flip_h", "flip_v"],
    "rotations": ["identity", "rot90", "rot180", "rot270"],
    "dihedral8": list(_DIHEDRAL),
}


def grid_transform(name: str) -> GridTransform:
    if name not in _DIHEDRAL:
        raise DomainError(f"Unknown transform {name!r}; expected one of {sorted(_DIHEDRAL)}")
    flip, turns = _DIHEDRAL[name]
    return GridTransform(name=name, flip=flip, quarter_turns=turns)


class TransformSet(BaseModel):
    """The K transforms of an ensemble; repeated entries are allowed."""
    transforms: List[GridTransform] = Field(min_length=1)

    @property
    def names(self) -> List[str]:
        return [t.name for t in self.transforms]

    def __len__(self) -> int:
        return len(self.transforms)

    @classmethod
    def from_names(cls, names: List[str]) -> "TransformSet":
        return cls(transforms=[grid_transform(name) for name in names])

    @classmethod
    def from_name(cls, name: str) -> "TransformSet":
        """One of "identity", "flips", "rotations" or "dihedral8"."""
        if name not in _NAMED_SETS:
            raise DomainError(f"Unknown ensemble {name!r}; expected one of {sorted(_NAMED_SETS)}")
        return cls.from_names(_NAMED_SETS[name])

    @classmethod
    def dihedral8(cls) -> "TransformSet":
        return cls.from_name("dihedral8")

    def check_shape(self, height: int, width: int) -> None:
        if height != width:
            rotating = [t.name for t in self.transforms if t.needs_square]
            if rotating:
                raise DomainError(f"Transforms {rotating} need a square image, got {height}x{width}")


def ensemble_log_density_batch(model: RideModel, ts: TransformSet, values: np.ndarray) -> np.ndarray:
    """Ensemble log-density in nats of every image in a (B, H, W) stack, shape (B,)."""
    values = np.asarray(values, dtype=np.float64)
    ts.check_shape(*values.shape[-2:])
    per_transform = np.stack([
        ride_log_density_batch(model, np.ascontiguousarray(t.forward(values))).sum(axis=(1, 2)) + t.log_det
        for t in ts.transforms
    ])
    return logsumexp(per_transform, axis=0) - np.log(len(ts))


def ensemble_log_density(model: RideModel, ts: TransformSet, image: Image) -> float:
    """
    log (1/K) sum_k p(T_k image) |det T_k| in nats.

    Raises:
        DomainError: If a quarter-turn transform is applied to a non-square image
    """
    return float(ensemble_log_density_batch(model, ts, image.values[None])[0])
