"""Shared pytest configuration for all tests."""

from hypothesis import settings

settings.register_profile("robust_loss_lab", max_examples=200, deadline=None)
settings.load_profile("robust_loss_lab")
