"""
Model container: b"RIDE\\n", a version line, a tensor count line, then for
every tensor a header line "<name> <ndim> <dim_0> ... <dim_k>\\n" followed by
its entries as little-endian float64 in row-major order. See README.md.
"""

import logging
import re
from pathlib import Path
from typing import Dict, List, Tuple, Union

import numpy as np

from misc.constants import LOGGER_NAME, MODEL_VERSION, FileMagic
from misc.exceptions import ModelFormatError
from models.mcgsm import PARAMETER_NAMES, McgsmParams
from models.ride import RideModel
from models.slstm import SlstmLayerParams
from models.whitening import WhiteningTransform
from schema.imaging import NeighborhoodSpec

logger = logging.getLogger(f"{LOGGER_NAME}.models.container")

_LAYER_TENSOR = re.compile(r"layers\.(\d+)\.(a|bias|extended)$")


def _tensors(model: RideModel) -> List[Tuple[str, np.ndarray]]:
    wt = model.whitening
    tensors = [
        ("neighborhood", np.array([model.neighborhood.width, model.neighborhood.rows_above], dtype=np.float64)),
        ("whitening.m_x", wt.m_x),
        ("whitening.m_y", np.array(wt.m_y)),
        ("whitening.cxx_inv_sqrt", wt.Cxx_inv_sqrt),
        ("whitening.cyx_white", wt.Cyx_white),
        ("whitening.w", np.array(wt.W)),
    ]
    for k, layer in enumerate(model.layers):
        tensors += [
            (f"layers.{k}.a", layer.A),
            (f"layers.{k}.bias", layer.bias),
            (f"layers.{k}.extended", np.array(float(layer.extended))),
        ]
    tensors += [(f"head.{name}", getattr(model.head, name)) for name in PARAMETER_NAMES]
    return tensors


def save_model(model: RideModel) -> bytes:
    """Encode a model as a container."""
    tensors = _tensors(model)
    chunks = [FileMagic.MODEL, f"{model.version}\n{len(tensors)}\n".encode("ascii")]
    for name, tensor in tensors:
        tensor = np.asarray(tensor, dtype=np.float64)
        dims = " ".join(str(d) for d in (tensor.ndim,) + tensor.shape)
        chunks.append(f"{name} {dims}\n".encode("ascii"))
        chunks.append(tensor.astype("<f8").tobytes())
    return b"".join(chunks)


def _read_line(data: bytes, position: int) -> Tuple[str, int]:
    end = data.find(b"\n", position)
    if end < 0:
        raise ModelFormatError(f"Unterminated header line at byte {position}")
    try:
        return data[position:end].decode("ascii"), end + 1
    except UnicodeDecodeError:
        raise ModelFormatError(f"Non-ASCII header line at byte {position}")


def _read_tensors(data: bytes) -> Tuple[str, Dict[str, np.ndarray]]:
    if not data.startswith(FileMagic.MODEL):
        raise ModelFormatError("Missing RIDE magic")
    version, position = _read_line(data, len(FileMagic.MODEL))
    if version != MODEL_VERSION:
        raise ModelFormatError(f"Unsupported model version {version!r}")
    count_line, position = _read_line(data, position)
    if not count_line.isdigit():
        raise ModelFormatError(f"Malformed tensor count {count_line!r}")
    tensors = {}
    for _ in range(int(count_line)):
        # Check the header before trusting its shape
        header, position = _read_line(data, position)
        fields = header.split(" ")
        try:
            name, ndim = fields[0], int(fields[1])
            shape = tuple(int(d) for d in fields[2:])
        except (IndexError, ValueError):
            raise ModelFormatError(f"Malformed tensor header {header!r}")
        if ndim < 0 or any(d < 0 for d in shape):
            raise ModelFormatError(f"Tensor {name} has a negative dimension in {header!r}")
        if len(shape) != ndim:
            raise ModelFormatError(f"Tensor {name} declares {ndim} dimensions but lists {len(shape)}")
        # Read the payload
        nbytes = 8 * int(np.prod(shape, dtype=np.int64))
        if position + nbytes > len(data):
            raise ModelFormatError(f"Truncated payload of tensor {name}")
        tensors[name] = np.frombuffer(data, dtype="<f8", count=nbytes // 8, offset=position).reshape(shape).copy()
        position += nbytes
    if position != len(data):
        raise ModelFormatError(f"Trailing bytes after the last tensor (byte {position})")
    return version, tensors


def load_model(data: bytes) -> RideModel:
    """
    Decode a container.

    Raises:
        ModelFormatError: If the container is malformed or inconsistent
    """
    version, tensors = _read_tensors(data)
    try:
        # Fixed tensors first, what remains must be SLSTM layers
        width, rows_above = (int(v) for v in tensors.pop("neighborhood"))
        whitening = WhiteningTransform(
            m_x=tensors.pop("whitening.m_x"),
            m_y=float(tensors.pop("whitening.m_y")),
            Cxx_inv_sqrt=tensors.pop("whitening.cxx_inv_sqrt"),
            Cyx_white=tensors.pop("whitening.cyx_white"),
            W=float(tensors.pop("whitening.w")),
        )
        head = McgsmParams(**{name: tensors.pop(f"head.{name}") for name in PARAMETER_NAMES})
        layer_fields: Dict[int, Dict[str, np.ndarray]] = {}
        for name in list(tensors):
            match = _LAYER_TENSOR.match(name)
            if match:
                layer_fields.setdefault(int(match.group(1)), {})[match.group(2)] = tensors.pop(name)
        if tensors:
            raise ModelFormatError(f"Unknown tensors: {sorted(tensors)}")
        if sorted(layer_fields) != list(range(len(layer_fields))):
            raise ModelFormatError(f"Layer indices are not contiguous: {sorted(layer_fields)}")
        layers = [
            SlstmLayerParams(
                A=layer_fields[k]["a"],
                bias=layer_fields[k]["bias"],
                extended=bool(layer_fields[k]["extended"]),
            )
            for k in range(len(layer_fields))
        ]
        return RideModel(
            neighborhood=NeighborhoodSpec(width=width, rows_above=rows_above),
            whitening=whitening,
            layers=layers,
            head=head,
            version=version,
        )
    except (KeyError, ValueError) as e:
        if isinstance(e, ModelFormatError):
            raise
        raise ModelFormatError(f"Inconsistent model container: {e}")


def save_model_file(path: Union[str, Path], model: RideModel) -> None:
    Path(path).write_bytes(save_model(model))
    logger.info(f"Saved model with {len(model.layers)} SLSTM layer(s) to {path}")


def load_model_file(path: Union[str, Path]) -> RideModel:
    model = load_model(Path(path).read_bytes())
    logger.info(f"Loaded model with {len(model.layers)} SLSTM layer(s) from {path}")
    return model
