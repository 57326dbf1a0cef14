"""Mobility measures and distribution-comparison scores."""
