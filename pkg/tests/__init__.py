"""Tests for the MLOps platform."""
