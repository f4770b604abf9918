#!/usr/bin/env python

"""
Test suite for the attention cost benchmark.

Tests cover:
- the halving of attention scores by merging at B=4
- the B^2 cost of extended attention
- equality of the three modes for single-frame chunks
- the instrumented cross-check and the CSV output
"""

import sys
from pathlib import Path

import numpy as np
import pytest

# Add parent directory to path to import pyvidtome
sys.path.insert(0, str(Path(__file__).parent.parent))

from pyvidtome.products.bench import analytic_lengths, format_table, read_csv, run_bench, write_csv
from pyvidtome.utils.config import BenchConfig


@pytest.fixture(scope='module')
def table():
    cfg = BenchConfig(chunk_sizes=[1, 4], ratios=[0.0, 0.9], tokens=[16, 64, 1000], instrumented_max_tokens=64)
    return run_bench(cfg)


def _row(table, chunk_size, ratio, tokens, mode):
    rows = table[(table.chunk_size == chunk_size) & (table.ratio == ratio) & (table.tokens == tokens)
                 & (table['mode'] == mode)]
    assert len(rows) == 1
    return rows.iloc[0]


class TestBench:
    """Test cases for run_bench()."""

    def test_merged_halves_scores(self, table):
        """Merged attention at B=4 and r=0.9 attends 1430 tokens at about half the per-frame cost."""
        row = _row(table, 4, 0.9, 1000, 'merged')
        assert row.attended_tokens == 1430
        assert 0.50 <= row.score_ratio_vs_per_frame <= 0.53

    def test_extended_is_b_squared(self, table):
        """Extended attention costs B squared single frames."""
        assert _row(table, 4, 0.9, 1000, 'extended').score_ratio_vs_single_frame == 16.0

    @pytest.mark.parametrize('tokens', [16, 64, 1000])
    def test_single_frame_chunks_are_equal(self, table, tokens):
        """Single-frame chunks cost the same in every mode."""
        rows = [_row(table, 1, 0.9, tokens, mode) for mode in ('per-frame', 'extended', 'merged')]
        for column in ('score_entries', 'macs', 'peak_buffer'):
            assert len({int(r[column]) for r in rows}) == 1

    def test_zero_ratio_is_per_frame(self, table):
        """A zero ratio costs exactly as much as per-frame attention."""
        merged = _row(table, 4, 0.0, 64, 'merged')
        per_frame = _row(table, 4, 0.0, 64, 'per-frame')
        assert merged.score_entries == per_frame.score_entries

    def test_instrumented_cross_check(self, table):
        """Small rows are cross-checked against instrumented execution, large rows are not."""
        small = table[table.tokens <= 64]
        large = table[table.tokens > 64]
        assert small.instrumented_match.tolist() == [True]*len(small)
        assert large.instrumented_match.isna().all()

    def test_lengths(self):
        """Sequence lengths per mode follow the merged token count."""
        assert analytic_lengths(4, 0.9, 1000) == {'per-frame': [1000]*4, 'extended': [4000], 'merged': [1430]}

    def test_csv_round_trip(self, table, tmp_path):
        """The table survives a CSV round trip."""
        path = write_csv(table, tmp_path/'bench.csv')
        restored = read_csv(path)
        for column in ('chunk_size', 'ratio', 'tokens', 'score_entries', 'macs', 'peak_buffer',
                       'score_ratio_vs_per_frame', 'score_ratio_vs_single_frame'):
            assert np.array_equal(restored[column].to_numpy(), table[column].to_numpy())
        assert restored['mode'].tolist() == table['mode'].tolist()

    def test_table_text(self, table):
        """The text rendering names the columns and modes."""
        text = format_table(table)
        assert 'score_entries' in text and 'merged' in text
