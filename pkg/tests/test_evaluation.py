"""
Tests for rates, ensembles and metric reports.
"""

import math
import tempfile
from pathlib import Path

import numpy as np
from scipy.stats import norm

from evaluation.ensemble import TransformSet, ensemble_log_density, grid_transform
from evaluation.rates import (
    evaluate_rate,
    gaussian_baseline_rate,
    loglik_rate,
    nats63_to_bits_per_px,
)
from evaluation.report import render_report, write_report
from imaging.image import Image
from misc.exceptions import DomainError
from models.ride import ride_log_density
from models.whitening import WhiteningTransform
from sampling.ancestral import ancestral_sample
from tests.test_base import BaseTest


class TestRates(BaseTest):
    """Test log-likelihood rates over disjoint patches."""

    def test_nats63_conversion(self):
        for ell, expected in [(152.1, 3.346), (155.1, 3.413), (156.2, 3.439)]:
            self.assertAlmostEqual(nats63_to_bits_per_px(ell), expected, delta=1e-3)
        self.assertAlmostEqual(nats63_to_bits_per_px(3.6569), 0.0, places=12)

    def test_single_patch(self):
        model = self.iid_model(mean=0.5, std=0.25)
        image = Image(values=self.rng().random((64, 64)))
        report = evaluate_rate(model, [image], 64)
        nats = norm.logpdf(image.values, loc=0.5, scale=0.25).sum()
        self.assertAlmostEqual(report.nats_total, nats, places=8)
        self.assertAlmostEqual(report.bits_per_pixel, nats / 4096 / math.log(2), places=10)
        self.assertEqual(report.pixel_count, 4096)
        self.assertEqual(report.patch_count, 1)

    def test_tiling(self):
        """A rate over four tiles is the pooled rate of the tiles evaluated separately."""
        model = self.small_ride(seed=1)
        image = Image(values=self.rng(2).random((16, 16)))
        tiles = [Image(values=image.values[r:r + 8, c:c + 8]) for r in (0, 8) for c in (0, 8)]
        nats = sum(ride_log_density(model, tile)[1] for tile in tiles)
        report = evaluate_rate(model, [image], 8)
        self.assertEqual(report.patch_count, 4)
        self.assertAlmostEqual(report.nats_total, nats, places=8)

    def test_remainder_discarded(self):
        report = evaluate_rate(self.iid_model(), [Image(values=np.zeros((70, 70)))], 64)
        self.assertEqual(report.pixel_count, 4096)

    def test_threads_do_not_change_result(self):
        model = self.small_ride(seed=3)
        images = [Image(values=self.rng(k).random((32, 32))) for k in range(4)]
        single = evaluate_rate(model, images, 8, threads=1)
        pooled = evaluate_rate(model, images, 8, threads=4)
        self.assertEqual(single.patch_count, 64)
        self.assertEqual(single.nats_total, pooled.nats_total)

    def test_loglik_rate(self):
        model = self.small_ride(seed=4)
        images = [Image(values=self.rng(5).random((16, 16)))]
        self.assertEqual(loglik_rate(model, images, 8), evaluate_rate(model, images, 8).bits_per_pixel)

    def test_standard_normal_entropy_rate(self):
        """On its own draws, an iid standard normal model scores minus its differential entropy."""
        rng = self.rng(20)
        images = [Image(values=rng.normal(size=(256, 256))) for _ in range(16)]
        expected = -(0.5 * math.log(2 * math.pi) + 0.5) / math.log(2)
        self.assertAlmostEqual(expected, -2.0471, places=4)
        self.assertAlmostEqual(loglik_rate(self.iid_model(), images, 64), expected, delta=0.02)

    def test_likelihood_discrimination(self):
        """A model rates its own samples above a perturbed copy of itself in at least 19 of 20 trials."""
        wins = 0
        for trial in range(20):
            model = self.small_ride(seed=trial)
            head = model.head.model_copy(update={"a": 0.25 * model.head.a})
            model = model.model_copy(update={"whitening": WhiteningTransform.identity(model.neighborhood.dim),
                                             "head": head})
            rng = self.rng(trial + 300)
            images = [ancestral_sample(model, 16, 16, rng) for _ in range(4)]
            vector = model.to_vector()
            perturbed = model.from_vector(vector + rng.normal(0.0, 0.5, vector.shape))
            if loglik_rate(model, images, 16) > loglik_rate(perturbed, images, 16):
                wins += 1
        self.assertGreaterEqual(wins, 19)

    def test_image_smaller_than_patch(self):
        with self.assertRaises(DomainError):
            evaluate_rate(self.iid_model(), [Image(values=np.zeros((63, 80)))], 64)
        with self.assertRaises(DomainError):
            evaluate_rate(self.iid_model(), [], 64)

    def test_gaussian_baseline(self):
        rng = self.rng(6)
        train = [Image(values=rng.random((8, 8))) for _ in range(3)]
        test = [Image(values=rng.random((16, 16)))]
        pixels = np.concatenate([image.values.ravel() for image in train])
        expected = norm.logpdf(test[0].values, pixels.mean(), pixels.std()).mean() / math.log(2)
        self.assertAlmostEqual(gaussian_baseline_rate(train, test, 16), expected, places=10)

    def test_gaussian_baseline_degenerate(self):
        with self.assertRaises(DomainError):
            gaussian_baseline_rate([Image(values=np.ones((4, 4)))], [Image(values=np.ones((4, 4)))], 4)


class TestTransforms(BaseTest):
    """Test the dihedral transforms."""

    def test_small_cases(self):
        values = np.array([[1, 2], [3, 4]])
        expected = {
            "identity": [[1, 2], [3, 4]],
            "flip_h": [[2, 1], [4, 3]],
            "flip_v": [[3, 4], [1, 2]],
            "transpose": [[1, 3], [2, 4]],
            "anti_transpose": [[4, 2], [3, 1]],
            "rot180": [[4, 3], [2, 1]],
        }
        for name, result in expected.items():
            np.testing.assert_array_equal(grid_transform(name).forward(values), result)

    def test_inverses(self):
        values = np.arange(16.0).reshape(4, 4)
        outputs = set()
        for t in TransformSet.dihedral8().transforms:
            transformed = t.forward(values)
            np.testing.assert_array_equal(t.inverse(transformed), values)
            outputs.add(transformed.tobytes())
        self.assertEqual(len(outputs), 8)

    def test_batch_axes(self):
        values = np.arange(32.0).reshape(2, 4, 4)
        t = grid_transform("rot90")
        np.testing.assert_array_equal(t.forward(values)[1], np.rot90(values[1]))

    def test_unknown_names(self):
        with self.assertRaises(DomainError):
            grid_transform("shear")
        with self.assertRaises(DomainError):
            TransformSet.from_name("everything")

    def test_named_sets(self):
        self.assertEqual(len(TransformSet.from_name("identity")), 1)
        self.assertEqual(TransformSet.from_name("flips").names, ["identity", "flip_h", "flip_v"])
        self.assertEqual(len(TransformSet.from_name("rotations")), 4)
        self.assertEqual(len(TransformSet.dihedral8()), 8)

    def test_empty_set_rejected(self):
        with self.assertRaises(ValueError):
            TransformSet(transforms=[])


class TestEnsemble(BaseTest):
    """Test ensemble densities."""

    def test_identity_matches_model(self):
        model = self.small_ride(seed=7)
        image = Image(values=self.rng(8).random((5, 5)))
        _, total = ride_log_density(model, image)
        self.assertAlmostEqual(ensemble_log_density(model, TransformSet.from_name("identity"), image), total, places=10)

    def test_duplicates_do_not_change_density(self):
        model = self.small_ride(seed=9)
        image = Image(values=self.rng(10).random((5, 5)))
        once = ensemble_log_density(model, TransformSet.from_names(["identity", "flip_h"]), image)
        twice = ensemble_log_density(model, TransformSet.from_names(["identity", "identity", "flip_h", "flip_h"]), image)
        self.assertAlmostEqual(once, twice, places=9)

    def test_bounds(self):
        """max_k log p_k - log K <= ensemble <= max_k log p_k, and the ensemble is at least the mean."""
        model = self.small_ride(seed=11)
        image = Image(values=self.rng(12).random((5, 5)))
        ts = TransformSet.dihedral8()
        members = [ride_log_density(model, Image(values=t.forward(image.values)))[1] for t in ts.transforms]
        value = ensemble_log_density(model, ts, image)
        self.assertGreaterEqual(value, max(members) - math.log(8) - 1e-9)
        self.assertLessEqual(value, max(members) + 1e-9)
        self.assertGreaterEqual(value, np.mean(members) - 1e-9)

    def test_iid_model_is_invariant(self):
        model = self.iid_model(mean=0.2, std=0.5)
        image = Image(values=self.rng(13).random((6, 6)))
        _, total = ride_log_density(model, image)
        self.assertAlmostEqual(ensemble_log_density(model, TransformSet.dihedral8(), image), total, places=9)

    def test_rotations_need_square_images(self):
        image = Image(values=np.zeros((4, 6)))
        with self.assertRaises(DomainError):
            ensemble_log_density(self.small_ride(), TransformSet.from_name("rotations"), image)
        value = ensemble_log_density(self.small_ride(), TransformSet.from_names(["identity", "rot180"]), image)
        self.assertTrue(np.isfinite(value))

    def test_ensemble_rate(self):
        model = self.iid_model()
        images = [Image(values=self.rng(14).random((16, 16)))]
        plain = evaluate_rate(model, images, 8)
        ensemble = evaluate_rate(model, images, 8, ensemble=TransformSet.dihedral8())
        self.assertAlmostEqual(plain.bits_per_pixel, ensemble.bits_per_pixel, places=10)


class TestReport(BaseTest):
    """Test metric reports."""

    def test_render(self):
        text = render_report({"bits_per_pixel": 3.5, "patch_count": 4, "ensemble": "dihedral8"})
        self.assertEqual(text, "bits_per_pixel\t3.500000\npatch_count\t4\nensemble\tdihedral8\n")

    def test_empty(self):
        self.assertEqual(render_report({}), "")

    def test_rejects_separators(self):
        with self.assertRaises(DomainError):
            render_report({"bad\tname": 1})
        with self.assertRaises(DomainError):
            render_report({"name": "two\nlines"})

    def test_write(self):
        with tempfile.TemporaryDirectory() as directory:
            path = Path(directory) / "report.tsv"
            write_report(path, {"bits_per_pixel": -0.25})
            self.assertEqual(path.read_bytes(), b"bits_per_pixel\t-0.250000\n")
