"""
Tests for the ride command line.
"""

import os
import tempfile
from pathlib import Path
from unittest.mock import patch

import numpy as np

from imaging.image import Image, load_image_file, save_image, save_image_file
from main import dispatch
from models.container import load_model_file, save_model_file
from tests.test_base import BaseTest


class TestCli(BaseTest):
    """Run subcommands through dispatch and check files and exit codes."""

    def setUp(self):
        self._directory = tempfile.TemporaryDirectory()
        self.root = Path(self._directory.name)

    def tearDown(self):
        self._directory.cleanup()

    def run_cli(self, *args) -> int:
        return dispatch([str(arg) for arg in args])

    def make_dataset(self, name: str, count: int = 2, size: int = 16, seed: int = 1) -> Path:
        directory = self.root / name
        code = self.run_cli("deadleaves", "--count", count, "--size", size, "--out", directory,
                            "--seed", seed, "--disks", 20)
        self.assertEqual(code, 0)
        return directory

    def make_model(self) -> Path:
        path = self.root / "model.ride"
        save_model_file(path, self.small_ride(seed=3))
        return path

    def write_config(self, text: str) -> Path:
        path = self.root / "run.conf"
        path.write_text(text, encoding="utf-8")
        return path

    def test_help(self):
        self.assertEqual(self.run_cli("--help"), 0)
        self.assertEqual(self.run_cli("eval", "--help"), 0)

    def test_unknown_command(self):
        self.assertEqual(self.run_cli("compress"), 1)

    def test_missing_option(self):
        self.assertEqual(self.run_cli("sample", "--height", 4), 1)

    def test_missing_model_file(self):
        data = self.make_dataset("test")
        code = self.run_cli("eval", "--model", self.root / "absent.ride", "--data", data,
                            "--report", self.root / "r.tsv", "--patch", 8)
        self.assertEqual(code, 2)

    def test_deadleaves_independent_of_threads(self):
        for threads in (1, 3):
            code = self.run_cli("deadleaves", "--count", 4, "--size", 12, "--out", self.root / f"t{threads}",
                                "--seed", 9, "--threads", threads)
            self.assertEqual(code, 0)
        names = sorted(p.name for p in (self.root / "t1").iterdir())
        self.assertEqual(names, [f"deadleaves_{k:05d}.fgrd" for k in range(4)])
        for name in names:
            self.assertEqual((self.root / "t1" / name).read_bytes(), (self.root / "t3" / name).read_bytes())

    def test_eval_report(self):
        data = self.make_dataset("test")
        model = self.make_model()
        report = self.root / "report.tsv"
        self.assertEqual(self.run_cli("eval", "--model", model, "--data", data, "--report", report, "--patch", 8), 0)
        lines = report.read_text(encoding="utf-8").splitlines()
        self.assertTrue(lines[0].startswith("bits_per_pixel\t"))
        self.assertIn("patch_count\t8", lines)
        self.assertIn("ensemble\tidentity", lines)

        self.assertEqual(self.run_cli("eval", "--model", model, "--data", data, "--report", report,
                                      "--patch", 8, "--ensemble", "dihedral8"), 0)
        self.assertIn("transforms\t8", report.read_text(encoding="utf-8").splitlines())

    def test_pgm_input_needs_seed(self):
        data = self.root / "pgm"
        data.mkdir()
        values = self.rng().integers(0, 256, (8, 8)).astype(float)
        (data / "a.pgm").write_bytes(save_image(Image(values=values), "pgm"))
        model = self.make_model()
        args = ["eval", "--model", model, "--data", data, "--report", self.root / "r.tsv", "--patch", 8]
        self.assertEqual(self.run_cli(*args), 1)
        self.assertEqual(self.run_cli(*args, "--seed", 4), 0)

    def test_sample(self):
        model = self.make_model()
        outputs = []
        for name in ("a.fgrd", "b.fgrd"):
            out = self.root / name
            self.assertEqual(self.run_cli("sample", "--model", model, "--height", 4, "--width", 5,
                                          "--seed", 7, "--out", out), 0)
            outputs.append(out.read_bytes())
        self.assertEqual(outputs[0], outputs[1])
        self.assertEqual(load_image_file(self.root / "a.fgrd").shape, (4, 5))

    def test_train_mcgsm(self):
        data = self.make_dataset("train")
        val = self.make_dataset("val", seed=2)
        config = self.write_config("components = 2\nfeatures = 2\nmcgsm_iterations = 5\nmcgsm_pairs = 200\n")
        out = self.root / "mcgsm.ride"
        code = self.run_cli("train", "--data", data, "--val", val, "--out", out, "--seed", 1,
                            "--config", config, "--mcgsm-only")
        self.assertEqual(code, 0)
        model = load_model_file(out)
        self.assertEqual(model.layers, [])
        self.assertEqual(model.head.num_components, 2)

    def test_train_ride(self):
        data = self.make_dataset("train")
        val = self.make_dataset("val", seed=2)
        config = self.write_config(
            "components = 2\nfeatures = 2\nhidden_units = 2\n"
            "epochs = 1\npatch_sizes = 8\nbatch_size = 2\nbatches_per_epoch = 1\nlr_start = 0.01\nlr_end = 0.01\n"
            "finetune_iters = 2\nfinetune_patches = 2\nvalidation_patch = 8\n"
        )
        out = self.root / "ride.ride"
        code = self.run_cli("train", "--data", data, "--val", val, "--out", out, "--seed", 1, "--config", config)
        self.assertEqual(code, 0)
        self.assertEqual([layer.hidden_dim for layer in load_model_file(out).layers], [2])

    def test_bad_config(self):
        data = self.make_dataset("train")
        config = self.write_config("epochs = 2\nbogus = 1\n")
        code = self.run_cli("train", "--data", data, "--val", data, "--out", self.root / "m.ride",
                            "--seed", 1, "--config", config)
        self.assertEqual(code, 2)

    def test_inpaint(self):
        model = self.make_model()
        values = self.rng(5).random((8, 8))
        image_path = self.root / "image.fgrd"
        save_image_file(image_path, Image(values=values))
        mask = np.zeros((8, 8))
        mask[3:6, 2:5] = 255
        mask_path = self.root / "mask.pgm"
        mask_path.write_bytes(save_image(Image(values=mask), "pgm"))
        out = self.root / "filled.fgrd"
        code = self.run_cli("inpaint", "--model", model, "--image", image_path, "--mask", mask_path,
                            "--seed", 3, "--out", out, "--sweeps", 2)
        self.assertEqual(code, 0)
        result = load_image_file(out).values
        observed = mask == 0
        np.testing.assert_array_equal(result[observed], values.astype("<f4").astype(np.float64)[observed])
        self.assertTrue(np.all(np.isfinite(result)))

    def test_corrupted_model(self):
        data = self.make_dataset("test")
        path = self.make_model()
        path.write_bytes(path.read_bytes().replace(b"whitening.m_y 0\n", b"whitening.m_y 1 -1\n", 1))
        code = self.run_cli("eval", "--model", path, "--data", data, "--report", self.root / "r.tsv", "--patch", 8)
        self.assertEqual(code, 2)

    def assertSameAcrossThreads(self, suffix: str, *args):
        outputs = []
        for threads in (1, 3):
            out = self.root / f"out{threads}{suffix}"
            self.assertEqual(self.run_cli(*args, "--out", out, "--threads", threads), 0)
            outputs.append(out.read_bytes())
        self.assertEqual(outputs[0], outputs[1])

    def test_train_independent_of_threads(self):
        data = self.make_dataset("train")
        val = self.make_dataset("val", seed=2)
        mcgsm = self.write_config("components = 2\nfeatures = 2\nmcgsm_iterations = 5\nmcgsm_pairs = 200\n")
        self.assertSameAcrossThreads(".ride", "train", "--data", data, "--val", val, "--seed", 1,
                                     "--config", mcgsm, "--mcgsm-only")
        ride = self.write_config(
            "components = 2\nfeatures = 2\nhidden_units = 2\n"
            "epochs = 1\npatch_sizes = 8\nbatch_size = 2\nbatches_per_epoch = 1\nlr_start = 0.01\nlr_end = 0.01\n"
            "finetune_iters = 2\nfinetune_patches = 2\nvalidation_patch = 8\n"
        )
        self.assertSameAcrossThreads(".ride", "train", "--data", data, "--val", val, "--seed", 1, "--config", ride)

    def test_inpaint_independent_of_threads(self):
        model = self.make_model()
        image_path = self.root / "image.fgrd"
        save_image_file(image_path, Image(values=self.rng(6).random((10, 10))))
        mask = np.zeros((10, 10))
        mask[2:7, 3:8] = 255
        mask_path = self.root / "mask.pgm"
        mask_path.write_bytes(save_image(Image(values=mask), "pgm"))
        self.assertSameAcrossThreads(".fgrd", "inpaint", "--model", model, "--image", image_path, "--mask", mask_path,
                                     "--seed", 3, "--sweeps", 2)

    def test_sample_independent_of_thread_setting(self):
        model = self.make_model()
        args = ["sample", "--model", model, "--height", 6, "--width", 5, "--seed", 8]
        self.assertEqual(self.run_cli(*args, "--out", self.root / "plain.fgrd"), 0)
        with patch.dict(os.environ, {"RIDE_THREADS": "3"}):
            self.assertEqual(self.run_cli(*args, "--out", self.root / "threaded.fgrd"), 0)
        self.assertEqual((self.root / "plain.fgrd").read_bytes(), (self.root / "threaded.fgrd").read_bytes())
        self.assertEqual(self.run_cli(*args, "--out", self.root / "x.fgrd", "--threads", 2), 1)
