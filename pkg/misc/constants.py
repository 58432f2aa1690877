"""
Constants for the ride-toolkit.
"""

import math
from enum import Enum


# Logger namespace shared by every module
LOGGER_NAME = "ride-toolkit"


# File format magic
class FileMagic:
    FGRD = b"FGRD\n"
    PGM = b"P5"
    MODEL = b"RIDE\n"


FGRD_VERSION = "v1"
MODEL_VERSION = "v1"
PGM_MAX_VALUE = 255


# Conversion of 63-dimensional patch log-likelihoods (nats) to bit/px
LOG_LIKELIHOOD_DC = 0.5020
LOG_DET_PREPROCESSING = -4.1589
PATCH_DIMS = 64


# Numerical safety
MAX_LOG_PRECISION = 30.0  # expert variance floored at e^-30
WHITENING_RIDGE = 1e-8  # relative to trace(C_xx) / D
LOG_2PI = math.log(2.0 * math.pi)


# Default neighborhood ("5 pixel wide", two rows above)
DEFAULT_NEIGHBORHOOD_WIDTH = 5
DEFAULT_ROWS_ABOVE = 2


# Dead-leaves generator defaults
DEAD_LEAVES_DEFAULTS = {
    "size": 256,
    "disk_count": 4000,
    "radius_min": 2.0,
    "radius_max": 64.0,
    "radius_exponent": 3.0,
    "intensity_range": (0.0, 1.0),
    "background": 0.5,
}


# Model sizes used by the RIDE experiments
DEFAULT_COMPONENTS = 32
DEFAULT_SCALES = 1
DEFAULT_FEATURES = 32
DEFAULT_HIDDEN_UNITS = 32


# Evaluation
DEFAULT_EVAL_PATCH = 64

# Training
MCGSM_TRAINING_PAIRS = 1_000_000


class EnsembleName(str, Enum):
    IDENTITY = "identity"
    FLIPS = "flips"
    ROTATIONS = "rotations"
    DIHEDRAL8 = "dihedral8"
