"""Pipelines for ingestion, simulation and evaluation."""
