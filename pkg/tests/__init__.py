"""Tests for hamlearn."""
