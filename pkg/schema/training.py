from pydantic import BaseModel, Field, field_validator, model_validator
from typing import List, Optional


class LbfgsConfig(BaseModel):
    """Settings of the L-BFGS optimizer and its strong Wolfe line search."""
    memory: int = Field(default=10, ge=1)
    max_iterations: int = Field(default=500, ge=1)
    gradient_tolerance: float = Field(default=1e-5, gt=0)
    c1: float = 1e-4
    c2: float = 0.9
    max_backtracks: int = Field(default=25, ge=1)

    @model_validator(mode="after")
    def check_wolfe_constants(self) -> "LbfgsConfig":
        if not 0.0 < self.c1 < self.c2 < 1.0:
            raise ValueError(f"Wolfe constants must satisfy 0 < c1 < c2 < 1, got c1={self.c1}, c2={self.c2}")
        return self


def default_patch_sizes(epochs: int, smallest: int = 8, largest: int = 22) -> List[int]:
    """Patch sides growing linearly from smallest to largest over the epochs."""
    if epochs <= 0:
        return []
    if epochs == 1:
        return [smallest]
    step = (largest - smallest) / (epochs - 1)
    return [int(round(smallest + k * step)) for k in range(epochs)]


class TrainSchedule(BaseModel):
    """
    Schedule of the RIDE training loop.

    SGD with momentum runs over batches of patches whose side grows per epoch;
    after every epoch the MCGSM head is finetuned with L-BFGS and the learning
    rate decays geometrically from lr_start toward lr_end.
    """
    batch_size: int = Field(default=50, ge=1)
    momentum: float = Field(default=0.9, ge=0, lt=1)
    lr_start: float = Field(default=1.0, gt=0)
    lr_end: float = Field(default=1e-4, gt=0)
    epochs: int = Field(default=8, ge=0)
    patch_sizes: List[int] = []
    finetune_iters: int = Field(default=500, ge=0)
    finetune_patches: int = Field(default=200, ge=1)
    early_stop_patience: int = Field(default=3, ge=1)
    batches_per_epoch: Optional[int] = Field(default=None, ge=1)
    validation_patch: int = Field(default=64, ge=1)
    augment_flips: bool = True

    @field_validator("patch_sizes", mode="before")
    @classmethod
    def split_patch_sizes(cls, value):
        # Config files carry the list as "8, 10, 12"
        if isinstance(value, str):
            return [int(part) for part in value.replace(",", " ").split()]
        return value

    @model_validator(mode="after")
    def check_schedule(self) -> "TrainSchedule":
        if self.lr_end > self.lr_start:
            raise ValueError(f"lr_end ({self.lr_end}) must not exceed lr_start ({self.lr_start})")
        if not self.patch_sizes:
            self.patch_sizes = default_patch_sizes(self.epochs)
        if len(self.patch_sizes) != self.epochs:
            raise ValueError(
                f"patch_sizes has {len(self.patch_sizes)} entries but the schedule has {self.epochs} epochs"
            )
        if any(side < 1 for side in self.patch_sizes):
            raise ValueError(f"patch sizes must be positive, got {self.patch_sizes}")
        if any(b < a for a, b in zip(self.patch_sizes, self.patch_sizes[1:])):
            raise ValueError(f"patch sizes must be non-decreasing, got {self.patch_sizes}")
        return self

    def learning_rate(self, epoch: int) -> float:
        """Learning rate used in the given epoch (geometric decay)."""
        if self.epochs <= 1:
            return self.lr_start
        ratio = (self.lr_end / self.lr_start) ** (1.0 / (self.epochs - 1))
        return self.lr_start * ratio ** epoch


class EpochRecord(BaseModel):
    """What happened in one epoch of train_ride."""
    epoch: int
    patch_size: int
    learning_rate: float
    batches: int
    train_loss: float
    finetune_loss: Optional[float] = None
    validation_rate: float
    improved: bool


class TrainingLog(BaseModel):
    """
    Per-epoch history of train_ride.

    Rates are in bit/px (higher is better); losses are mean negative
    log-likelihoods in nats per pixel. best_epoch is -1 when the initial
    model was never beaten.
    """
    initial_validation_rate: Optional[float] = None
    epochs: List[EpochRecord] = []
    best_epoch: int = -1
    best_validation_rate: Optional[float] = None
    stopped_early: bool = False
