import numpy as np
import pytest

from latentfaces.errors import (
    CannotCalibrateError,
    DegenerateGalleryError,
    InsufficientDataError,
    ShapeError,
)
from latentfaces.imaging import FaceImage
from latentfaces.recognition import (
    BaselineStats,
    GalleryEntry,
    compare,
    compute_baselines,
    enroll,
)
from latentfaces.synthface import gen_dataset


@pytest.fixture(scope="module")
def small_gallery():
    ds = gen_dataset(2, 12, side=64, seed=21)
    return [GalleryEntry(s.sample_id, s.label, s.image) for s in ds]


@pytest.fixture(scope="module")
def small_model(small_gallery):
    return enroll(small_gallery)


class TestEnroll:
    def test_deterministic_bitwise(self, small_gallery):
        a = enroll(small_gallery)
        b = enroll(small_gallery)
        assert a.basis.tobytes() == b.basis.tobytes()
        assert a.projections.tobytes() == b.projections.tobytes()
        assert (a.steepness, a.midpoint, a.reference_scale) == (
            b.steepness,
            b.midpoint,
            b.reference_scale,
        )

    def test_single_label_cannot_calibrate(self):
        ds = gen_dataset(2, 4, side=64, seed=3)
        entries = [GalleryEntry(s.sample_id, "only", s.image) for s in ds]
        with pytest.raises(CannotCalibrateError):
            enroll(entries)

    def test_identical_images_degenerate(self):
        img = FaceImage(np.full((64, 64), 0.4))
        entries = [
            GalleryEntry("a1", "A", img),
            GalleryEntry("a2", "A", img),
            GalleryEntry("b1", "B", img),
            GalleryEntry("b2", "B", img),
        ]
        with pytest.raises(DegenerateGalleryError):
            enroll(entries)

    def test_size_mismatch(self, small_gallery):
        bad = small_gallery[:3] + [
            GalleryEntry("odd", "id00", FaceImage(np.full((32, 32), 0.5)))
        ]
        with pytest.raises(ShapeError):
            enroll(bad)

    def test_calibration_fixed_point(self, small_gallery, small_model):
        # median intra-label pair similarity maps to 99.0 by construction
        sims = {}
        for probe in small_gallery:
            for r in compare(small_model, probe.image):
                if r.entry_id != probe.entry_id:
                    sims.setdefault(probe.label == r.entry_label, []).append(r.similarity)
        assert float(np.median(sims[True])) == pytest.approx(99.0, abs=0.5)
        assert float(np.median(sims[False])) == pytest.approx(2.0, abs=0.5)

    def test_positive_steepness(self, small_model):
        assert small_model.steepness > 0
        assert small_model.reference_scale > 0


class TestCompare:
    def test_self_match_dominates(self, small_gallery, small_model):
        probe = small_gallery[0]
        results = compare(small_model, probe.image)
        own = next(r for r in results if r.entry_id == probe.entry_id)
        sims = [r.similarity for r in results]
        assert own.similarity >= np.percentile(sims, 99)

    def test_noise_probe_low_confidence(self, small_gallery, small_model):
        rng = np.random.default_rng(5)
        noise = FaceImage(rng.uniform(size=(64, 64)))
        noise_conf = compare(small_model, noise)[0].confidence
        gallery_confs = [
            compare(small_model, e.image)[0].confidence for e in small_gallery
        ]
        assert noise_conf < min(gallery_confs)

    def test_flat_probe_zero_similarity(self, small_model):
        flat = FaceImage(np.full((64, 64), 0.5))
        results = compare(small_model, flat)
        assert all(r.similarity == 0.0 for r in results)
        assert all(r.confidence == 0.0 for r in results)

    def test_ordered_by_entry_id(self, small_gallery, small_model):
        results = compare(small_model, small_gallery[0].image)
        ids = [r.entry_id for r in results]
        assert ids == sorted(ids)
        assert len(results) == len(small_gallery)

    def test_metrics_in_range(self, small_gallery, small_model):
        for probe in small_gallery[:4]:
            for r in compare(small_model, probe.image):
                for v in (r.similarity, r.confidence, r.brightness, r.sharpness):
                    assert 0.0 <= v <= 100.0

    def test_shape_mismatch(self, small_model):
        with pytest.raises(ShapeError):
            compare(small_model, FaceImage(np.full((32, 32), 0.5)))

    def test_similarity_monotone_in_cosine(self, small_model):
        from latentfaces.recognition import _similarity_from_cosine

        cos = np.linspace(-1, 1, 101)
        sims = _similarity_from_cosine(small_model, cos)
        assert np.all(np.diff(sims) >= 0)


class TestBaselines:
    def test_matrix_structure(self, small_gallery, small_model):
        base = compute_baselines(small_model, small_gallery)
        labels = {"id00", "id01"}
        assert set(base.similarity) == {(a, b) for a in labels for b in labels}
        for (pl, gl), st in base.similarity.items():
            assert st["stddev"] >= 0
            if pl == gl:
                assert st["mean"] > base.similarity[(pl, next(iter(labels - {gl})))]["mean"]

    def test_single_pair_stddev_zero(self, small_gallery):
        model = enroll(small_gallery)
        one = [small_gallery[0]]
        base = compute_baselines(model, one)
        st = base.similarity[("id00", "id01")]
        assert st["count"] == 12 and st["stddev"] >= 0.0
        # one probe, one entry of its own: self-similarity cell has n matching entries
        base_single = compute_baselines(model, one)
        assert base_single.quality["confidence"]["stddev"] == 0.0

    def test_empty_probes(self, small_model):
        with pytest.raises(InsufficientDataError):
            compute_baselines(small_model, [])

    def test_round_trip_dict(self, small_gallery, small_model):
        base = compute_baselines(small_model, small_gallery)
        back = BaselineStats.from_dict(base.to_dict())
        assert back.similarity == base.similarity
        assert back.quality == base.quality
