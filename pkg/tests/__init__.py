"""Tests for robust loss lab."""
