#!/usr/bin/env python

"""
Test suite for the reference self-attention and its cost accounting.

Tests cover:
- single token, duplicate tokens and permutation equivariance
- agreement with a scalar re-derivation
- analytic costs against the counts measured during execution
"""

import math
import sys
from pathlib import Path

import numpy as np
import pytest

# Add parent directory to path to import pyvidtome
sys.path.insert(0, str(Path(__file__).parent.parent))

from pyvidtome.attention import AttentionWeights, CostCounter, CostReport, cost_of, self_attention
from pyvidtome.utils.errors import DimensionError, EmptySetError, NumericError, ParameterError


def _scalar_attention(tokens, weights):
    '''straight-line single-head attention with python floats'''
    x = tokens.tolist()
    channels = len(x[0])

    def project(row, w):
        return [sum(row[i]*w[i][j] for i in range(channels)) for j in range(channels)]

    wq, wk, wv, wo = (w.tolist() for w in (weights.wq, weights.wk, weights.wv, weights.wo))
    q = [project(row, wq) for row in x]
    k = [project(row, wk) for row in x]
    v = [project(row, wv) for row in x]
    out = []
    for qi in q:
        scores = [sum(a*b for a, b in zip(qi, kj))/math.sqrt(channels) for kj in k]
        top = max(scores)
        exps = [math.exp(s - top) for s in scores]
        total = sum(exps)
        attended = [sum(exps[j]/total*v[j][c] for j in range(len(x))) for c in range(channels)]
        out.append(project(attended, wo))
    return np.array(out)


class TestAttentionWeights:
    """Test cases for AttentionWeights."""

    def test_seeded(self):
        """Weights drawn from the same seed are identical."""
        a, b = AttentionWeights.from_seed(8, seed=3), AttentionWeights.from_seed(8, seed=3)
        assert np.array_equal(a.wq, b.wq) and np.array_equal(a.wo, b.wo)

    def test_scale(self):
        """Projection entries are bounded by one over the square root of the channel count."""
        weights = AttentionWeights.from_seed(16, seed=0)
        assert np.abs(weights.wq).max() <= 1.0/math.sqrt(16)

    def test_heads_must_divide_channels(self):
        """The head count must divide the channel count."""
        with pytest.raises(ParameterError):
            AttentionWeights.from_seed(8, head_count=3)

    def test_shape_mismatch(self):
        """Projection shapes must agree with the channel count."""
        with pytest.raises(DimensionError):
            AttentionWeights(np.eye(2), np.eye(2), np.eye(3), np.eye(2))


class TestSelfAttention:
    """Test cases for self_attention()."""

    def test_single_token(self):
        """A single token attends only to itself."""
        weights = AttentionWeights.from_seed(4, seed=1)
        token = np.array([[0.5, -1.0, 2.0, 0.25]])
        expected = token @ weights.wv @ weights.wo
        assert np.allclose(self_attention(token, weights), expected, atol=1e-12)

    def test_duplicates_receive_identical_outputs(self):
        """Two identical tokens receive identical outputs."""
        rng = np.random.default_rng(0)
        tokens = rng.standard_normal((5, 8))
        tokens = np.vstack([tokens, tokens[2]])
        out = self_attention(tokens, AttentionWeights.from_seed(8, seed=2))
        assert np.allclose(out[2], out[5], atol=1e-12)

    def test_scalar_rederivation(self):
        """The vectorised path agrees with a scalar re-derivation."""
        weights = AttentionWeights.from_seed(4, seed=5)
        tokens = np.random.default_rng(9).standard_normal((3, 4))
        assert np.allclose(self_attention(tokens, weights), _scalar_attention(tokens, weights), atol=1e-10)

    def test_rows_are_stochastic(self):
        """Attention probabilities sum to one per query."""
        tokens = np.random.default_rng(4).standard_normal((20, 8))
        _, probs = self_attention(tokens, AttentionWeights.from_seed(8, head_count=2, seed=4), return_probs=True)
        assert np.allclose(probs.sum(axis=-1), 1.0, atol=1e-6)

    def test_permutation_equivariance(self):
        """Permuting the tokens permutes the output the same way."""
        rng = np.random.default_rng(6)
        tokens = rng.standard_normal((16, 8))
        weights = AttentionWeights.from_seed(8, head_count=2, seed=6)
        order = rng.permutation(16)
        assert np.allclose(self_attention(tokens[order], weights), self_attention(tokens, weights)[order], atol=1e-6)

    def test_keeps_float32(self):
        """float32 tokens give float32 output."""
        tokens = np.ones((3, 4), dtype=np.float32)
        assert self_attention(tokens, AttentionWeights.from_seed(4)).dtype == np.float32

    def test_empty(self):
        """An empty token sequence is rejected."""
        with pytest.raises(EmptySetError):
            self_attention(np.zeros((0, 4)), AttentionWeights.from_seed(4))

    def test_channel_mismatch(self):
        """Tokens must have the channel count of the weights."""
        with pytest.raises(DimensionError):
            self_attention(np.zeros((2, 3)), AttentionWeights.from_seed(4))

    def test_overflow_is_reported(self):
        """Overflowing scores raise a NumericError naming the step."""
        weights = AttentionWeights(np.eye(2)*1e200, np.eye(2)*1e200, np.eye(2), np.eye(2))
        with pytest.raises(NumericError) as info:
            self_attention(np.ones((2, 2)), weights)
        assert info.value.step == 'scores'


class TestCostOf:
    """Test cases for the analytic cost model."""

    def test_merged_vs_per_frame(self):
        """Merged attention costs about half of per-frame attention for a four-frame chunk."""
        per_frame = cost_of([1000]*4, 8)
        merged = cost_of([1430], 8)
        assert per_frame.score_entries == 4*10**6
        assert merged.score_entries == 2044900
        assert round(merged.score_entries/per_frame.score_entries, 3) == 0.511

    def test_extended_is_sixteen_frames(self):
        """Extended attention over four frames costs sixteen single frames."""
        assert cost_of([4000], 8).score_entries == 16*cost_of([1000], 8).score_entries

    def test_single_token(self):
        """One token costs one score entry per head."""
        assert cost_of([1], 8, head_count=2).score_entries == 2

    def test_batch_takes_max_peak(self):
        """A batch sums the work and keeps the largest buffer."""
        total = cost_of([10, 20], 4)
        assert total.peak_buffer == cost_of([20], 4).peak_buffer
        assert total.macs == cost_of([10], 4).macs + cost_of([20], 4).macs

    def test_invalid_length(self):
        """Sequence lengths must be positive."""
        with pytest.raises(ParameterError):
            cost_of([0], 4)

    @pytest.mark.parametrize('lengths, heads', [([1], 1), ([7], 2), ([16, 16, 16, 16], 1), ([64], 4), ([3, 33, 60], 2)])
    def test_matches_instrumented_execution(self, lengths, heads):
        """The analytic cost equals the instrumented cost."""
        weights = AttentionWeights.from_seed(8, head_count=heads, seed=0)
        counter = CostCounter()
        rng = np.random.default_rng(1)
        for length in lengths:
            self_attention(rng.standard_normal((length, 8)), weights, counter)
        assert counter.total == cost_of(lengths, 8, heads)
        assert counter.calls == len(lengths) and counter.sequence_lengths == lengths

    def test_report_dict(self):
        """Cost reports serialise to a dict."""
        assert CostReport(1, 2, 3).as_dict() == {'score_entries': 1, 'macs': 2, 'peak_buffer': 3}
