"""Markov mobility-diary generator."""
