#!/usr/bin/env python

"""
Test suite for merge_tokens() and unmerge_tokens().

Tests cover:
- output layout and counts of both merge modes, replace-mode idempotence
- unmerge restoring counts, ordering and untouched values
- provenance checks
"""

import sys
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

# Add parent directory to path to import pyvidtome
sys.path.insert(0, str(Path(__file__).parent.parent))

from pyvidtome.matching import MatchMap, match
from pyvidtome.merge import MergeMode, merge_tokens, unmerge_tokens
from pyvidtome.utils.errors import ConsistencyError


def _instance(rng, s, d, channels, r):
    src = rng.standard_normal((s, channels)).astype(np.float32)
    dst = rng.standard_normal((d, channels)).astype(np.float32)
    return src, dst, match(src, dst, r)


class TestMerge:
    """Test cases for merge_tokens()."""

    def test_layout_replace(self):
        """Replace mode keeps surviving src tokens in order followed by the dst tokens."""
        src = np.array([[1.0, 0.0], [0.0, 1.0], [5.0, 5.0]])
        dst = np.array([[2.0, 0.0], [0.0, 2.0]])
        match_map = MatchMap([0], [0], [1.0], 3, 2)
        merged = merge_tokens(src, dst, match_map, MergeMode.REPLACE)
        assert merged.tokens.tolist() == [[0.0, 1.0], [5.0, 5.0], [2.0, 0.0], [0.0, 2.0]]
        assert merged.src_order.tolist() == [1, 2]

    def test_mean_mode(self):
        """Mean mode averages every dst token with the src tokens merged into it."""
        src = np.array([[1.0, 0.0], [3.0, 0.0]])
        dst = np.array([[2.0, 0.0]])
        match_map = MatchMap([0, 1], [0, 0], [1.0, 1.0], 2, 1)
        merged = merge_tokens(src, dst, match_map, MergeMode.MEAN)
        assert merged.tokens.tolist() == [[2.0, 0.0]]

    def test_count(self):
        """Merging leaves S + D - r tokens."""
        rng = np.random.default_rng(0)
        src, dst, match_map = _instance(rng, 30, 20, 4, 12)
        assert len(merge_tokens(src, dst, match_map)) == 30 + 20 - 12

    def test_wrong_sizes(self):
        """Token counts must match the map sizes."""
        match_map = MatchMap.empty(3, 2)
        with pytest.raises(ConsistencyError):
            merge_tokens(np.ones((2, 2)), np.ones((2, 2)), match_map)

    def test_empty_map_is_concatenation(self):
        """An empty map concatenates src and dst."""
        src, dst = np.ones((2, 3)), np.zeros((1, 3))
        merged = merge_tokens(src, dst, MatchMap.empty(2, 1))
        assert np.array_equal(merged.tokens, np.concatenate([src, dst]))

    def test_replace_is_idempotent(self):
        """Merging the unmerged tokens again with the same map reproduces the first merge."""
        rng = np.random.default_rng(3)
        for _ in range(50):
            s, d = int(rng.integers(1, 40)), int(rng.integers(1, 40))
            src, dst, match_map = _instance(rng, s, d, 4, int(rng.integers(0, s + 1)))
            once = merge_tokens(src, dst, match_map, MergeMode.REPLACE)
            twice = merge_tokens(*unmerge_tokens(once), match_map, MergeMode.REPLACE)
            assert np.array_equal(twice.tokens, once.tokens)
            assert np.array_equal(twice.src_order, once.src_order)


class TestUnmerge:
    """Test cases for unmerge_tokens()."""

    def test_broadcasts_dst_values(self):
        """Unmerge copies the dst value onto every merged src token."""
        src = np.array([[1.0, 0.0], [0.0, 1.0]])
        dst = np.array([[2.0, 0.0]])
        merged = merge_tokens(src, dst, MatchMap([0], [0], [1.0], 2, 1))
        out_src, out_dst = unmerge_tokens(merged, np.array([[7.0, 7.0], [9.0, 9.0]]))
        assert out_src.tolist() == [[9.0, 9.0], [7.0, 7.0]]
        assert out_dst.tolist() == [[9.0, 9.0]]

    def test_length_mismatch(self):
        """Values of the wrong length are rejected."""
        rng = np.random.default_rng(1)
        src, dst, match_map = _instance(rng, 5, 5, 3, 2)
        merged = merge_tokens(src, dst, match_map)
        with pytest.raises(ConsistencyError):
            unmerge_tokens(merged, np.zeros((len(merged) + 1, 3)))

    @settings(max_examples=100, deadline=None)
    @given(st.integers(0, 2**32 - 1), st.sampled_from(list(MergeMode)))
    def test_property_round_trip(self, seed, mode):
        """Unmerge restores the src and dst shapes for any instance."""
        rng = np.random.default_rng(seed)
        s, d = int(rng.integers(1, 40)), int(rng.integers(1, 40))
        src, dst, match_map = _instance(rng, s, d, 3, int(rng.integers(0, s + 1)))
        out_src, out_dst = unmerge_tokens(merge_tokens(src, dst, match_map, mode))
        assert out_src.shape == src.shape and out_dst.shape == dst.shape

    def test_round_trip_sweep(self):
        """Unmerge restores untouched tokens and links merged ones to their dst values."""
        rng = np.random.default_rng(77)
        failures = 0
        for trial in range(1000):
            s, d = int(rng.integers(1, 129)), int(rng.integers(1, 129))
            channels = int(rng.integers(1, 9))
            r = int(rng.integers(0, s + 1))
            mode = MergeMode.REPLACE if trial % 2 == 0 else MergeMode.MEAN
            src, dst, match_map = _instance(rng, s, d, channels, r)
            merged = merge_tokens(src, dst, match_map, mode)
            out_src, out_dst = unmerge_tokens(merged)

            untouched = np.ones(s, dtype=bool)
            untouched[match_map.src_idx] = False
            ok = out_src.shape == src.shape and out_dst.shape == dst.shape
            ok = ok and np.array_equal(out_src[untouched], src[untouched])
            ok = ok and np.array_equal(out_src[match_map.src_idx], out_dst[match_map.dst_idx])
            if mode is MergeMode.REPLACE:
                ok = ok and np.array_equal(out_dst, dst)
                ok = ok and np.array_equal(out_src[match_map.src_idx], dst[match_map.dst_idx])
            else:
                absorbed = np.zeros(d, dtype=bool)
                absorbed[match_map.dst_idx] = True
                ok = ok and np.array_equal(out_dst[~absorbed], dst[~absorbed])
            failures += not ok
        assert failures == 0
