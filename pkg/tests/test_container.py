"""
Tests for the model container.
"""

import tempfile
from pathlib import Path

import numpy as np

from misc.exceptions import ModelFormatError
from models.container import load_model, load_model_file, save_model, save_model_file
from tests.test_base import BaseTest


def add_tensor(data: bytes, header: bytes, payload: bytes) -> bytes:
    """Append a tensor to an encoded container and bump its tensor count."""
    prefix = b"RIDE\nv1\n"
    end = data.index(b"\n", len(prefix))
    count = int(data[len(prefix):end])
    return prefix + str(count + 1).encode("ascii") + data[end:] + header + payload


class TestContainer(BaseTest):
    """Test encoding and decoding of models."""

    def assertModelsEqual(self, first, second):
        self.assertEqual(first.neighborhood, second.neighborhood)
        self.assertEqual(len(first.layers), len(second.layers))
        for a, b in zip(first.layers, second.layers):
            self.assertEqual(a.extended, b.extended)
        np.testing.assert_array_equal(first.to_vector(), second.to_vector())
        np.testing.assert_array_equal(first.whitening.Cxx_inv_sqrt, second.whitening.Cxx_inv_sqrt)
        np.testing.assert_array_equal(first.whitening.m_x, second.whitening.m_x)
        self.assertEqual(first.whitening.W, second.whitening.W)
        self.assertEqual(first.whitening.m_y, second.whitening.m_y)

    def test_roundtrip(self):
        for hidden_dims, extended in [((), False), ((3,), False), ((3, 2), True)]:
            model = self.small_ride(hidden_dims=hidden_dims, extended=extended)
            data = save_model(model)
            restored = load_model(data)
            self.assertModelsEqual(restored, model)
            self.assertEqual(save_model(restored), data)

    def test_header(self):
        data = save_model(self.small_ride(hidden_dims=()))
        self.assertTrue(data.startswith(b"RIDE\nv1\n11\nneighborhood 1 2\n"))
        payload = np.frombuffer(data, dtype="<f8", count=2, offset=len(b"RIDE\nv1\n11\nneighborhood 1 2\n"))
        np.testing.assert_array_equal(payload, [3.0, 1.0])

    def test_tensor_count(self):
        data = save_model(self.small_ride(hidden_dims=(3, 2)))
        self.assertTrue(data.startswith(b"RIDE\nv1\n17\n"))

    def test_file_roundtrip(self):
        model = self.small_ride(seed=3)
        with tempfile.TemporaryDirectory() as directory:
            path = Path(directory) / "model.ride"
            save_model_file(path, model)
            self.assertModelsEqual(load_model_file(path), model)

    def test_bad_magic(self):
        with self.assertRaises(ModelFormatError):
            load_model(b"EDIR\nv1\n0\n")

    def test_unsupported_version(self):
        data = save_model(self.small_ride())
        with self.assertRaises(ModelFormatError):
            load_model(data.replace(b"RIDE\nv1\n", b"RIDE\nv9\n", 1))

    def test_truncated(self):
        data = save_model(self.small_ride())
        for cut in (len(data) - 1, len(data) // 2, 7):
            with self.assertRaises(ModelFormatError):
                load_model(data[:cut])

    def test_trailing_bytes(self):
        with self.assertRaises(ModelFormatError):
            load_model(save_model(self.small_ride()) + b"\x00")

    def test_unknown_tensor(self):
        data = add_tensor(save_model(self.small_ride()), b"extra 1 1\n", np.zeros(1, dtype="<f8").tobytes())
        with self.assertRaises(ModelFormatError) as ctx:
            load_model(data)
        self.assertIn("extra", str(ctx.exception))

    def test_missing_layer_index(self):
        model = self.small_ride(hidden_dims=(3,))
        layer = model.layers[0]
        data = save_model(model)
        for name, tensor in (("a", layer.A), ("bias", layer.bias), ("extended", np.array(0.0))):
            dims = " ".join(str(d) for d in (tensor.ndim,) + tensor.shape)
            data = add_tensor(data, f"layers.2.{name} {dims}\n".encode("ascii"), tensor.astype("<f8").tobytes())
        with self.assertRaises(ModelFormatError):
            load_model(data)

    def test_malformed_header(self):
        data = save_model(self.small_ride()).replace(b"neighborhood 1 2\n", b"neighborhood x 2\n", 1)
        with self.assertRaises(ModelFormatError):
            load_model(data)

    def test_inconsistent_shapes(self):
        """A head that does not fit the stored layers is rejected."""
        data = save_model(self.small_ride(hidden_dims=(3,)))
        other = save_model(self.small_ride(hidden_dims=(2,)))
        head_at = data.index(b"head.eta")
        other_head_at = other.index(b"head.eta")
        with self.assertRaises(ModelFormatError):
            load_model(data[:head_at] + other[other_head_at:])

    def test_negative_dimension(self):
        data = save_model(self.small_ride()).replace(b"whitening.m_y 0\n", b"whitening.m_y 1 -1\n", 1)
        with self.assertRaises(ModelFormatError) as ctx:
            load_model(data)
        self.assertIn("whitening.m_y", str(ctx.exception))
