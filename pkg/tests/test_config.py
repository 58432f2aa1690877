"""
Tests for config files and environment settings.
"""

import os
import tempfile
from pathlib import Path
from unittest.mock import patch

from misc.config import CliConfig, load_settings, parse_config, parse_config_file
from misc.exceptions import ConfigError
from schema.training import TrainSchedule
from tests.test_base import BaseTest


class TestParseConfig(BaseTest):
    """Test "key = value" config files."""

    def assertConfigError(self, text: str, line):
        with self.assertRaises(ConfigError) as ctx:
            parse_config(text)
        self.assertEqual(ctx.exception.line, line)
        if line is not None:
            self.assertTrue(str(ctx.exception).startswith(f"line {line}: "))
        return ctx.exception

    def test_empty_file_gives_defaults(self):
        config = parse_config("")
        self.assertEqual(config, CliConfig())
        self.assertEqual(config.schedule(), TrainSchedule())
        self.assertEqual(config.neighborhood().dim, 12)
        self.assertEqual(config.hidden_units, [32])

    def test_values_comments_and_blank_lines(self):
        config = parse_config(
            "# a small run\n"
            "\n"
            "epochs = 2\n"
            "patch_sizes = 8, 10   # grows\n"
            "lr_end = 1e-3\n"
            "hidden_units = 16 16\n"
            "extended = true\n"
            "mcgsm_pairs = none\n"
        )
        schedule = config.schedule()
        self.assertEqual(schedule.epochs, 2)
        self.assertEqual(schedule.patch_sizes, [8, 10])
        self.assertAlmostEqual(schedule.learning_rate(1), 1e-3)
        self.assertEqual(config.hidden_units, [16, 16])
        self.assertTrue(config.extended)
        self.assertIsNone(config.mcgsm_pairs)

    def test_schedule_defaults(self):
        schedule = parse_config("").schedule()
        self.assertEqual(schedule.batch_size, 50)
        self.assertEqual(schedule.momentum, 0.9)
        self.assertEqual(schedule.learning_rate(0), 1.0)
        self.assertAlmostEqual(schedule.learning_rate(schedule.epochs - 1), 1e-4)

    def test_empty_hidden_units(self):
        self.assertEqual(parse_config("hidden_units =\n").hidden_units, [])

    def test_inpaint_section(self):
        cfg = parse_config("sweeps = 10\nlocal_window = 9\n").inpaint()
        self.assertEqual(cfg.sweeps, 10)
        self.assertEqual(cfg.local_window, 9)
        self.assertEqual(cfg.block_stride, 3)

    def test_unknown_key(self):
        error = self.assertConfigError("# header\n\nbogus = 1\n", 3)
        self.assertIn("bogus", str(error))

    def test_repeated_key(self):
        self.assertConfigError("epochs = 2\nsweeps = 3\nepochs = 4\n", 3)

    def test_missing_value(self):
        self.assertConfigError("sweeps = 3\nepochs\n", 2)

    def test_invalid_value_names_its_line(self):
        self.assertConfigError("epochs = 2\ncomponents = 0\n", 2)
        self.assertConfigError("batch_size = lots\n", 1)
        error = self.assertConfigError("rows_above = 2\n\nneighborhood_width = 4\n", 3)
        self.assertIn("neighborhood_width", str(error))

    def test_cross_field_error(self):
        with self.assertRaises(ConfigError) as ctx:
            parse_config("block_size = 3\nblock_overlap = 3\n")
        self.assertIn("block_overlap", str(ctx.exception))

    def test_parse_file(self):
        with tempfile.TemporaryDirectory() as directory:
            path = Path(directory) / "run.conf"
            path.write_text("components = 8\nfeatures = 4\n", encoding="utf-8")
            config = parse_config_file(path)
        self.assertEqual((config.components, config.features), (8, 4))


class TestSettings(BaseTest):
    """Test environment settings."""

    def test_default_level(self):
        with patch.dict(os.environ, {}, clear=True):
            self.assertEqual(load_settings().log_level, "INFO")

    def test_level_from_environment(self):
        with patch.dict(os.environ, {"RIDE_LOG_LEVEL": "debug"}):
            self.assertEqual(load_settings().log_level, "DEBUG")

    def test_unknown_level(self):
        with patch.dict(os.environ, {"RIDE_LOG_LEVEL": "loud"}):
            with self.assertRaises(ConfigError):
                load_settings()
