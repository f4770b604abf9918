"""Tests for pyvidtome package."""
