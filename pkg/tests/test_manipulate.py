import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from latentfaces.errors import GridTooLargeError, InsufficientDataError, InvalidInputError
from latentfaces.latentpca import LATENT_DIM
from latentfaces.manipulate import (
    SweepSpec,
    class_mean_coords,
    component_ranges,
    pc1_transition,
    per_component_swaps,
    substitute_except,
    sweep,
)


def _vec(**overrides):
    v = np.zeros(LATENT_DIM)
    for k, val in overrides.items():
        v[int(k)] = val
    return v


class TestClassMeans:
    def test_single_sample_is_itself(self):
        v = np.arange(64.0)
        means = class_mean_coords({"A": [v]})
        np.testing.assert_array_equal(means["A"], v)

    def test_two_sample_mean(self):
        means = class_mean_coords({"A": [_vec(), _vec(**{"0": 2.0})]})
        np.testing.assert_array_equal(means["A"], _vec(**{"0": 1.0}))

    def test_matches_naive_accumulation(self):
        rng = np.random.default_rng(0)
        coords = rng.normal(size=(30, LATENT_DIM))
        means = class_mean_coords({"A": coords})
        naive = np.zeros(LATENT_DIM)
        for row in coords:
            naive += row
        naive /= len(coords)
        np.testing.assert_allclose(means["A"], naive, atol=1e-10)

    def test_empty_label(self):
        with pytest.raises(InsufficientDataError):
            class_mean_coords({"A": []})


class TestPc1Transition:
    def test_endpoints(self):
        a = np.arange(64.0)
        b = -np.arange(64.0) - 1
        steps = pc1_transition(a, b, 5)
        np.testing.assert_array_equal(steps[0], a)
        expected_last = a.copy()
        expected_last[0] = b[0]
        np.testing.assert_array_equal(steps[-1], expected_last)

    def test_midpoint(self):
        a = _vec(**{"0": -4.0})
        b = _vec(**{"0": 4.0})
        steps = pc1_transition(a, b, 3)
        assert [s[0] for s in steps] == [-4.0, 0.0, 4.0]

    def test_other_components_held(self):
        a = np.arange(64.0)
        for s in pc1_transition(a, np.zeros(64), 4):
            np.testing.assert_array_equal(s[1:], a[1:])

    def test_count_and_precondition(self):
        assert len(pc1_transition(_vec(), _vec(), 9)) == 9
        with pytest.raises(InvalidInputError):
            pc1_transition(_vec(), _vec(), 1)


class TestSubstituteExcept:
    def test_keep_all(self):
        orig = np.arange(64.0)
        out = substitute_except(orig, np.zeros(64), keep_indices=range(64))
        np.testing.assert_array_equal(out, orig)

    def test_keep_none(self):
        ref = np.arange(64.0)
        out = substitute_except(np.zeros(64), ref, keep_indices=())
        np.testing.assert_array_equal(out, ref)

    def test_default_keeps_first(self):
        orig = _vec(**{"0": 5.0, "1": 1.0, "2": 1.0})
        ref = _vec(**{"0": 9.0, "1": 2.0, "2": 3.0})
        out = substitute_except(orig, ref)
        assert out[0] == 5.0 and out[1] == 2.0 and out[2] == 3.0

    def test_out_of_range_index(self):
        with pytest.raises(InvalidInputError):
            substitute_except(_vec(), _vec(), keep_indices={64})

    @given(st.sets(st.integers(0, 63)))
    @settings(max_examples=25, deadline=None)
    def test_self_substitution_identity(self, keep):
        v = np.arange(64.0)
        np.testing.assert_array_equal(substitute_except(v, v, keep), v)


class TestSweep:
    def test_single_index_three_steps(self):
        spec = SweepSpec([0], [(-1.0, 1.0)], 3)
        cands = sweep(_vec(), spec)
        assert [c.coords[0] for c in cands] == [-1.0, 0.0, 1.0]
        assert [c.grid_position for c in cands] == [(0,), (1,), (2,)]

    def test_grid_count(self):
        spec = SweepSpec([3, 7], [(-1.0, 1.0), (0.0, 2.0)], 4)
        cands = sweep(_vec(), spec)
        assert len(cands) == 16

    def test_empty_index_list(self):
        spec = SweepSpec([], [], 5)
        cands = sweep(np.arange(64.0), spec)
        assert len(cands) == 1
        np.testing.assert_array_equal(cands[0].coords, np.arange(64.0))

    def test_row_major_ascending_indices(self):
        # indices given out of order: output still iterates ascending index order
        spec = SweepSpec([5, 2], [(0.0, 1.0), (10.0, 11.0)], 2)
        cands = sweep(_vec(), spec)
        # first axis is index 2 (range 10..11), second is index 5 (0..1)
        assert cands[0].coords[2] == 10.0 and cands[0].coords[5] == 0.0
        assert cands[1].coords[2] == 10.0 and cands[1].coords[5] == 1.0
        assert cands[2].coords[2] == 11.0 and cands[2].coords[5] == 0.0

    def test_unswept_stay_at_base(self):
        base = np.arange(64.0)
        spec = SweepSpec([0], [(-1.0, 1.0)], 3)
        for c in sweep(base, spec):
            np.testing.assert_array_equal(c.coords[1:], base[1:])

    def test_grid_cap(self):
        assert SweepSpec([0, 1, 2, 3], [(-1.0, 1.0)] * 4, 10).grid_size() == 10000
        with pytest.raises(GridTooLargeError) as exc:
            SweepSpec([0, 1, 2, 3], [(-1.0, 1.0)] * 4, 11)
        assert "14641" in str(exc.value)

    def test_duplicate_indices(self):
        with pytest.raises(InvalidInputError):
            SweepSpec([0, 0], [(-1.0, 1.0)] * 2, 3)

    def test_bad_range(self):
        with pytest.raises(InvalidInputError):
            SweepSpec([0], [(1.0, 1.0)], 3)

    def test_json_round_trip(self):
        spec = SweepSpec([0, 2], [(-1.5, 2.5), (0.0, 1.0)], 5)
        data = spec.to_dict()
        assert data == {"indices": [0, 2], "ranges": [[-1.5, 2.5], [0.0, 1.0]], "steps": 5}
        assert SweepSpec.from_dict(data) == spec

    def test_malformed_dict(self):
        with pytest.raises(InvalidInputError):
            SweepSpec.from_dict({"indices": [0]})


class TestComponentRanges:
    def test_single_vector(self):
        v = np.arange(64.0)
        r = component_ranges([v])
        np.testing.assert_array_equal(r[:, 0], v)
        np.testing.assert_array_equal(r[:, 1], v)

    def test_two_vectors(self):
        a, b = np.zeros(64), np.ones(64)
        r = component_ranges([a, b])
        np.testing.assert_array_equal(r[:, 0], a)
        np.testing.assert_array_equal(r[:, 1], b)

    def test_matches_exhaustive_scan(self):
        rng = np.random.default_rng(1)
        coords = rng.normal(size=(25, LATENT_DIM))
        r = component_ranges(coords)
        for k in range(LATENT_DIM):
            lo = min(coords[i][k] for i in range(25))
            hi = max(coords[i][k] for i in range(25))
            assert r[k, 0] == lo and r[k, 1] == hi

    def test_accepts_label_map(self):
        r = component_ranges({"A": [np.zeros(64)], "B": [np.ones(64)]})
        np.testing.assert_array_equal(r[:, 1], np.ones(64))

    def test_empty(self):
        with pytest.raises(InsufficientDataError):
            component_ranges([])


class TestPerComponentSwaps:
    def test_identical_inputs(self):
        v = np.arange(64.0)
        for c in per_component_swaps(v, v):
            np.testing.assert_array_equal(c, v)

    def test_first_candidate_differs_only_at_zero(self):
        orig = np.zeros(64)
        ref = np.ones(64)
        cands = per_component_swaps(orig, ref)
        assert len(cands) == 64
        assert cands[0][0] == 1.0
        np.testing.assert_array_equal(cands[0][1:], 0.0)

    def test_swaps_cover_reference(self):
        rng = np.random.default_rng(2)
        orig, ref = rng.normal(size=64), rng.normal(size=64)
        cands = per_component_swaps(orig, ref)
        rebuilt = orig.copy()
        for k, c in enumerate(cands):
            rebuilt[k] = c[k]
        np.testing.assert_array_equal(rebuilt, ref)
